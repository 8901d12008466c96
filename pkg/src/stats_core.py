# src/stats_core.py
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from src.comparison_policy import DEFAULT_ALPHA, DEFAULT_CI_LEVEL, SIDEDNESS, T_TEST_VARIANTS
from src.errors import (
    ConfigurationError,
    DataValidationError,
    DegenerateVarianceError,
    InsufficientDataError,
    StructuralError,
)
from src.special import (
    f_cdf,
    f_sf,
    student_t_cdf,
    student_t_ppf,
    student_t_sf,
    student_t_two_sided_p,
)

logger = logging.getLogger(__name__)

NOISE_SHAPES: Tuple[str, ...] = ("normal", "lognormal")


# ----------------------------
# Result objects
# ----------------------------

@dataclass(frozen=True)
class SampleSummary:
    n: int
    mean: float
    variance: float
    std: float
    cv: Optional[float]  # None when mean == 0
    ci_level: float
    ci_lo: float
    ci_hi: float

    @property
    def ci_half_width(self) -> float:
        return self.ci_hi - self.mean


@dataclass(frozen=True)
class TTestResult:
    t_stat: float
    dof: float
    p_value: float
    variant: str  # "pooled" | "welch" | "paired"
    sidedness: str
    alpha: float
    significant: bool
    mean_difference: float
    perfect_separation: bool = False


@dataclass(frozen=True)
class FTestResult:
    f_stat: float
    dof_num: int
    dof_den: int
    p_value: float
    sidedness: str
    alpha: float
    significant: bool
    degenerate: bool = False


# ----------------------------
# Moments
# ----------------------------

def _moments(sample: Sequence[float], *, name: str = "sample") -> Tuple[int, float, float]:
    values = [float(v) for v in sample]
    n = len(values)
    if n < 2:
        raise InsufficientDataError(f"{name} needs at least 2 observations, got {n}")
    for i, v in enumerate(values):
        if not math.isfinite(v):
            raise DataValidationError(f"{name}[{i}] is not finite: {v!r}")
    mean = math.fsum(values) / n
    variance = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return n, mean, variance


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ConfigurationError(f"alpha must be in (0, 1), got {alpha!r}")


def _check_sidedness(sidedness: str) -> None:
    if sidedness not in SIDEDNESS:
        raise ConfigurationError(f"unknown sidedness {sidedness!r}; expected one of {SIDEDNESS}")


def summarize(sample: Sequence[float], ci_level: float = DEFAULT_CI_LEVEL) -> SampleSummary:
    """Mean, sample variance (n-1), cv and a two-sided t interval."""
    if not 0.0 < ci_level < 1.0:
        raise ConfigurationError(f"ci_level must be in (0, 1), got {ci_level!r}")
    values = [float(v) for v in sample]
    n, mean, variance = _moments(values)
    if any(v < 0.0 for v in values):
        raise DataValidationError("durations must be non-negative")

    std = math.sqrt(variance)
    cv = std / mean if mean != 0.0 else None

    if variance == 0.0:
        lo = hi = mean
    else:
        half = student_t_ppf((1.0 + ci_level) / 2.0, n - 1) * std / math.sqrt(n)
        lo, hi = mean - half, mean + half

    return SampleSummary(
        n=n,
        mean=mean,
        variance=variance,
        std=std,
        cv=cv,
        ci_level=ci_level,
        ci_lo=lo,
        ci_hi=hi,
    )


# ----------------------------
# t-tests
# ----------------------------

def _t_p_value(t: float, dof: float, sidedness: str) -> float:
    if sidedness == "two_sided":
        return student_t_two_sided_p(t, dof)
    if sidedness == "less":
        return student_t_cdf(t, dof)
    return student_t_sf(t, dof)


def _separated(diff: float, dof: float, variant: str, sidedness: str, alpha: float) -> TTestResult:
    # Both samples constant.
    if diff == 0.0:
        return TTestResult(
            t_stat=0.0, dof=dof, p_value=1.0, variant=variant, sidedness=sidedness,
            alpha=alpha, significant=False, mean_difference=0.0,
        )
    t = math.copysign(math.inf, diff)
    if sidedness == "two_sided":
        p = 0.0
    elif sidedness == "less":
        p = 0.0 if diff < 0.0 else 1.0
    else:
        p = 0.0 if diff > 0.0 else 1.0
    return TTestResult(
        t_stat=t, dof=dof, p_value=p, variant=variant, sidedness=sidedness,
        alpha=alpha, significant=p < alpha, mean_difference=diff, perfect_separation=True,
    )


def t_test(
    a: Sequence[float],
    b: Sequence[float],
    variant: str = "pooled",
    sidedness: str = "two_sided",
    alpha: float = DEFAULT_ALPHA,
) -> TTestResult:
    """
    Two-sample t-test on mean(a) - mean(b).

    "less" tests mean(a) < mean(b); "greater" tests mean(a) > mean(b).
    """
    if variant not in T_TEST_VARIANTS:
        raise ConfigurationError(f"unknown t-test variant {variant!r}")
    _check_sidedness(sidedness)
    _check_alpha(alpha)

    na, ma, va = _moments(a, name="a")
    nb, mb, vb = _moments(b, name="b")
    diff = ma - mb

    if va == 0.0 and vb == 0.0:
        return _separated(diff, float(na + nb - 2), variant, sidedness, alpha)

    if variant == "pooled":
        dof = float(na + nb - 2)
        pooled = ((na - 1) * va + (nb - 1) * vb) / dof
        se = math.sqrt(pooled * (1.0 / na + 1.0 / nb))
    else:
        sa = va / na
        sb = vb / nb
        se = math.sqrt(sa + sb)
        dof = (sa + sb) ** 2 / (sa * sa / (na - 1) + sb * sb / (nb - 1))

    t = diff / se
    p = _t_p_value(t, dof, sidedness)
    return TTestResult(
        t_stat=t,
        dof=dof,
        p_value=p,
        variant=variant,
        sidedness=sidedness,
        alpha=alpha,
        significant=p < alpha,
        mean_difference=diff,
    )


def paired_t_test(
    a: Sequence[float],
    b: Sequence[float],
    sidedness: str = "two_sided",
    alpha: float = DEFAULT_ALPHA,
) -> TTestResult:
    _check_sidedness(sidedness)
    _check_alpha(alpha)
    if len(a) != len(b):
        raise StructuralError(f"paired test needs equal lengths, got {len(a)} and {len(b)}")

    diffs = [float(x) - float(y) for x, y in zip(a, b)]
    n, md, vd = _moments(diffs, name="differences")
    dof = float(n - 1)
    if vd == 0.0:
        return _separated(md, dof, "paired", sidedness, alpha)

    t = md / math.sqrt(vd / n)
    p = _t_p_value(t, dof, sidedness)
    return TTestResult(
        t_stat=t,
        dof=dof,
        p_value=p,
        variant="paired",
        sidedness=sidedness,
        alpha=alpha,
        significant=p < alpha,
        mean_difference=md,
    )


# ----------------------------
# F-test
# ----------------------------

def f_test(
    a: Sequence[float],
    b: Sequence[float],
    sidedness: str = "two_sided",
    alpha: float = DEFAULT_ALPHA,
) -> FTestResult:
    """Variance-ratio test with f = var(a) / var(b); orientation is never swapped."""
    _check_sidedness(sidedness)
    _check_alpha(alpha)

    na, _, va = _moments(a, name="a")
    nb, _, vb = _moments(b, name="b")
    d1, d2 = na - 1, nb - 1

    if va == 0.0 and vb == 0.0:
        raise DegenerateVarianceError("both samples have zero variance; F ratio undefined")

    degenerate = va == 0.0 or vb == 0.0
    if vb == 0.0:
        f = math.inf
    elif va == 0.0:
        f = 0.0
    else:
        f = va / vb

    lower = f_cdf(f, d1, d2)
    upper = f_sf(f, d1, d2)
    if sidedness == "two_sided":
        p = min(1.0, 2.0 * min(lower, upper))
    elif sidedness == "less":
        p = lower
    else:
        p = upper

    return FTestResult(
        f_stat=f,
        dof_num=d1,
        dof_den=d2,
        p_value=p,
        sidedness=sidedness,
        alpha=alpha,
        significant=p < alpha,
        degenerate=degenerate,
    )


# ----------------------------
# Noise model + Monte-Carlo power
# ----------------------------

def draw_durations(
    rng: np.random.Generator,
    center: float,
    std: float,
    size: int,
    shape: str = "normal",
) -> np.ndarray:
    """Positive durations around ``center``; nonpositive normal draws are redrawn."""
    if not center > 0.0:
        raise ConfigurationError(f"durations need a positive center, got {center!r}")
    if shape == "normal":
        values = rng.normal(center, std, size)
        bad = values <= 0.0
        while bad.any():
            values[bad] = rng.normal(center, std, int(bad.sum()))
            bad = values <= 0.0
        return values
    if shape == "lognormal":
        sigma2 = math.log1p((std / center) ** 2)
        mu = math.log(center) - sigma2 / 2.0
        return rng.lognormal(mu, math.sqrt(sigma2), size)
    raise ConfigurationError(f"unknown noise shape {shape!r}; expected one of {NOISE_SHAPES}")


def _trial_rejects(
    seed_seq: np.random.SeedSequence,
    *,
    effect_fraction: float,
    cv: float,
    n: int,
    alpha: float,
    variant: str,
    sidedness: str,
    noise_shape: str,
    mean: float,
) -> bool:
    rng = np.random.default_rng(seed_seq)
    std = cv * mean
    a = draw_durations(rng, mean, std, n, noise_shape)
    b = draw_durations(rng, mean * (1.0 - effect_fraction), std, n, noise_shape)
    return t_test(a.tolist(), b.tolist(), variant=variant, sidedness=sidedness, alpha=alpha).significant


def power_estimate(
    effect_fraction: float,
    cv: float,
    n_per_group: int,
    alpha: float = DEFAULT_ALPHA,
    trials: int = 2000,
    seed: int = 0,
    *,
    variant: str = "pooled",
    sidedness: str = "two_sided",
    noise_shape: str = "normal",
    mean: float = 1.0,
    workers: int = 1,
    progress: bool = False,
) -> float:
    """
    Fraction of simulated comparisons in which t_test rejects at ``alpha``.

    Each trial owns a child of SeedSequence(seed), so the estimate does not
    depend on worker count or completion order.
    """
    if not -1.0 < effect_fraction < 1.0:
        raise ConfigurationError(f"effect_fraction must be in (-1, 1), got {effect_fraction!r}")
    if not cv > 0.0:
        raise ConfigurationError(f"cv must be > 0, got {cv!r}")
    if n_per_group < 2:
        raise ConfigurationError(f"n_per_group must be >= 2, got {n_per_group}")
    if trials < 100:
        raise ConfigurationError(f"trials must be >= 100, got {trials}")
    if not mean > 0.0:
        raise ConfigurationError(f"mean must be > 0, got {mean!r}")
    _check_alpha(alpha)
    if noise_shape not in NOISE_SHAPES:
        raise ConfigurationError(f"unknown noise shape {noise_shape!r}")

    children = np.random.SeedSequence(seed).spawn(trials)

    def run_chunk(chunk: List[np.random.SeedSequence]) -> int:
        hits = 0
        for ss in chunk:
            hits += _trial_rejects(
                ss,
                effect_fraction=effect_fraction,
                cv=cv,
                n=n_per_group,
                alpha=alpha,
                variant=variant,
                sidedness=sidedness,
                noise_shape=noise_shape,
                mean=mean,
            )
        return hits

    chunk_size = 100
    chunks = [children[i:i + chunk_size] for i in range(0, trials, chunk_size)]

    rejections = 0
    with tqdm(total=trials, disable=not progress, desc="power", unit="trial") as bar:
        if workers <= 1:
            for chunk in chunks:
                rejections += run_chunk(chunk)
                bar.update(len(chunk))
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                for chunk, hits in zip(chunks, pool.map(run_chunk, chunks)):
                    rejections += hits
                    bar.update(len(chunk))

    power = rejections / trials
    logger.info(
        "power_estimate effect=%s cv=%s n=%d alpha=%s trials=%d -> %.4f",
        effect_fraction, cv, n_per_group, alpha, trials, power,
    )
    return power
