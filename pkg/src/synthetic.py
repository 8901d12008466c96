# src/synthetic.py
"""
Seeded stand-in for an iterative application's per-step timings.

Warmup steps come first and are slower by ``warmup_inflation``; the remaining
steps are i.i.d. around ``mean * (1 - effect_fraction)`` with std ``cv * mean``.
Two specs that differ only in ``effect_fraction`` share their random stream,
so the candidate is the baseline shifted by ``effect_fraction * mean``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Any, Dict, Optional

import numpy as np

from src.comparison_policy import DEFAULT_WARMUP
from src.errors import ConfigurationError
from src.ingest import Step, TimingSeries
from src.stats_core import NOISE_SHAPES, draw_durations

DEFAULT_WARMUP_INFLATION = 1.3


@dataclass(frozen=True)
class SyntheticSpec:
    mean: float = 250.0
    cv: float = 0.10
    n_steps: int = 37
    warmup_steps: int = DEFAULT_WARMUP
    warmup_inflation: float = DEFAULT_WARMUP_INFLATION
    effect_fraction: float = 0.0
    seed: int = 0
    noise_shape: str = "normal"

    def __post_init__(self) -> None:
        if not self.mean > 0.0:
            raise ConfigurationError(f"mean must be > 0, got {self.mean}")
        if not self.cv > 0.0:
            raise ConfigurationError(f"cv must be > 0, got {self.cv}")
        if self.warmup_steps < 0:
            raise ConfigurationError(f"warmup_steps must be >= 0, got {self.warmup_steps}")
        if self.n_steps < self.warmup_steps + 2:
            raise ConfigurationError(
                f"n_steps={self.n_steps} leaves fewer than 2 steps after {self.warmup_steps} warmup steps"
            )
        if self.warmup_inflation <= 0.0:
            raise ConfigurationError(f"warmup_inflation must be > 0, got {self.warmup_inflation}")
        if not -1.0 < self.effect_fraction < 1.0:
            raise ConfigurationError(f"effect_fraction must lie in (-1, 1), got {self.effect_fraction}")
        if self.noise_shape not in NOISE_SHAPES:
            raise ConfigurationError(f"unknown noise shape {self.noise_shape!r}; expected one of {NOISE_SHAPES}")

    def snapshot(self) -> Dict[str, Any]:
        return asdict(self)


def generate_synthetic(
    spec: SyntheticSpec,
    *,
    run_id: Optional[str] = None,
    config: Optional[Dict[str, Any]] = None,
) -> TimingSeries:
    rng = np.random.default_rng(spec.seed)
    std = spec.cv * spec.mean
    center = spec.mean * (1.0 - spec.effect_fraction)

    warm = draw_durations(rng, center * spec.warmup_inflation, std, spec.warmup_steps, spec.noise_shape)
    body = draw_durations(rng, center, std, spec.n_steps - spec.warmup_steps, spec.noise_shape)
    values = np.concatenate([warm, body])

    return TimingSeries(
        run_id=run_id or f"synthetic_seed{spec.seed}_e{spec.effect_fraction:g}",
        source="<synthetic>",
        steps=tuple(Step(i, float(v)) for i, v in enumerate(values)),
        config=config if config is not None else {"synthetic": spec.snapshot()},
    )
