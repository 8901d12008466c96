# src/comparison_policy.py
from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

from src.errors import ConfigurationError


DEFAULT_ALPHA = 0.05
DEFAULT_CI_LEVEL = 0.95
DEFAULT_SAMPLE_SIZE = 35
DEFAULT_WARMUP = 2
MIN_NORMAL_SAMPLE = 30
DEFAULT_EFFICIENCY_THRESHOLD = 0.70

# two-sample variants; the paired test is chosen with ComparisonPolicy.paired
T_TEST_VARIANTS: Tuple[str, ...] = ("pooled", "welch")
SIDEDNESS: Tuple[str, ...] = ("two_sided", "less", "greater")
GATE_POLICIES: Tuple[str, ...] = ("fail_on_slower", "fail_on_not_faster")


@dataclass(frozen=True)
class ComparisonPolicy:
    # Decision rule
    alpha: float = DEFAULT_ALPHA
    variant: str = "pooled"  # one of T_TEST_VARIANTS
    sidedness: str = "two_sided"
    paired: bool = False

    # Sampling protocol
    sample_size: int = DEFAULT_SAMPLE_SIZE
    warmup: int = DEFAULT_WARMUP
    ci_level: float = DEFAULT_CI_LEVEL

    # Scaling
    efficiency_threshold: float = DEFAULT_EFFICIENCY_THRESHOLD

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ConfigurationError(f"alpha must be in (0,1), got {self.alpha}")
        if self.variant not in T_TEST_VARIANTS:
            raise ConfigurationError(f"unknown t-test variant: {self.variant!r}")
        if self.sidedness not in SIDEDNESS:
            raise ConfigurationError(f"unknown sidedness: {self.sidedness!r}")
        if self.sample_size < 2:
            raise ConfigurationError("sample_size must be >= 2")
        if self.warmup < 0:
            raise ConfigurationError("warmup must be >= 0")
        if not 0.0 < self.ci_level < 1.0:
            raise ConfigurationError(f"ci_level must be in (0,1), got {self.ci_level}")
