# src/analysis.py
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import minimize_scalar

from src.comparison_policy import DEFAULT_EFFICIENCY_THRESHOLD, ComparisonPolicy
from src.errors import (
    AlignmentError,
    DataValidationError,
    DegenerateVarianceError,
    EmptyResultError,
    SettingLookupError,
    StructuralError,
)
from src.ingest import BandwidthRecord, TimingSeries, sample_first_n, trim_warmup
from src.stats_core import (
    FTestResult,
    SampleSummary,
    TTestResult,
    f_test,
    paired_t_test,
    summarize,
    t_test,
)

logger = logging.getLogger(__name__)

VERDICTS = ("faster", "slower", "indistinguishable")


# ----------------------------
# Run-vs-run comparison
# ----------------------------

@dataclass(frozen=True)
class ComparisonVerdict:
    baseline_id: str
    candidate_id: str
    baseline_summary: SampleSummary
    candidate_summary: SampleSummary
    speedup: float  # baseline mean / candidate mean
    mean_test: TTestResult
    variance_test: Optional[FTestResult]  # None when both windows have zero variance
    window: Tuple[int, int]  # (first step index, n)
    verdict: str
    std_change_fraction: Optional[float] = None
    notes: Tuple[str, ...] = ()


def _classify(test: TTestResult, speedup: float) -> str:
    if test.significant and speedup > 1.0:
        return "faster"
    if test.significant and speedup < 1.0:
        return "slower"
    return "indistinguishable"


def _window(series: TimingSeries, policy: ComparisonPolicy) -> TimingSeries:
    series = trim_warmup(series, policy.warmup)
    return sample_first_n(series, policy.sample_size)


def compare_runs(
    baseline: TimingSeries,
    candidate: TimingSeries,
    alpha: Optional[float] = None,
    variant: Optional[str] = None,
    n: Optional[int] = None,
    *,
    policy: Optional[ComparisonPolicy] = None,
) -> ComparisonVerdict:
    """
    Apply the trim/sample protocol to both runs and decide faster / slower / indistinguishable.

    Explicit ``alpha``, ``variant`` and ``n`` override the matching policy fields.
    """
    policy = policy or ComparisonPolicy()
    overrides = {}
    if alpha is not None:
        overrides["alpha"] = alpha
    if variant is not None:
        overrides["variant"] = variant
    if n is not None:
        overrides["sample_size"] = n
    if overrides:
        policy = replace(policy, **overrides)

    base = _window(baseline, policy)
    cand = _window(candidate, policy)

    if base.indices != cand.indices:
        differing = [
            f"{i}:{bi}!={ci}" for i, (bi, ci) in enumerate(zip(base.indices, cand.indices)) if bi != ci
        ]
        raise AlignmentError(
            f"{baseline.run_id} and {candidate.run_id} cover different step windows; "
            f"differing positions {', '.join(differing[:5])}"
        )

    a, b = base.seconds, cand.seconds
    base_summary = summarize(a, policy.ci_level)
    cand_summary = summarize(b, policy.ci_level)
    speedup = base_summary.mean / cand_summary.mean

    if policy.paired:
        mean_test = paired_t_test(a, b, sidedness=policy.sidedness, alpha=policy.alpha)
    else:
        mean_test = t_test(a, b, variant=policy.variant, sidedness=policy.sidedness, alpha=policy.alpha)

    notes: List[str] = list(dict.fromkeys(base.annotations + cand.annotations))
    variance_test: Optional[FTestResult]
    try:
        variance_test = f_test(a, b, alpha=policy.alpha)
    except DegenerateVarianceError as e:
        variance_test = None
        notes.append(f"variance test skipped: {e}")
        logger.warning("%s vs %s: %s", baseline.run_id, candidate.run_id, e)

    std_change = None
    if base_summary.std > 0.0:
        std_change = cand_summary.std / base_summary.std - 1.0

    return ComparisonVerdict(
        baseline_id=baseline.run_id,
        candidate_id=candidate.run_id,
        baseline_summary=base_summary,
        candidate_summary=cand_summary,
        speedup=speedup,
        mean_test=mean_test,
        variance_test=variance_test,
        window=(base.indices[0], len(base)),
        verdict=_classify(mean_test, speedup),
        std_change_fraction=std_change,
        notes=tuple(notes),
    )


# ----------------------------
# Cross-run per-step table
# ----------------------------

@dataclass(frozen=True)
class StepRow:
    step: int
    runs: int
    mean: float
    std: float
    min: float
    max: float


@dataclass(frozen=True)
class CrossRunTable:
    rows: Tuple[StepRow, ...]
    mean_of_means: float  # each run's mean over its steps, then averaged
    pooled_mean: float  # all steps of all runs together


def cross_run_step_table(
    series: Sequence[TimingSeries],
    steps: Optional[Iterable[int]] = None,
) -> CrossRunTable:
    """One row per step index present in every run (optionally restricted to ``steps``)."""
    if len(series) < 2:
        raise StructuralError(f"cross-run table needs at least 2 runs, got {len(series)}")

    by_run: List[Dict[int, float]] = [dict(s.steps) for s in series]
    common = set(by_run[0])
    for m in by_run[1:]:
        common &= set(m)
    if steps is not None:
        common &= set(steps)
    if not common:
        raise EmptyResultError("no step index is shared by every run")

    rows = []
    for idx in sorted(common):
        vals = np.array([m[idx] for m in by_run], dtype=float)
        rows.append(
            StepRow(
                step=idx,
                runs=len(vals),
                mean=float(vals.mean()),
                std=float(vals.std(ddof=1)),
                min=float(vals.min()),
                max=float(vals.max()),
            )
        )

    all_values = [v for s in series for v in s.seconds]
    return CrossRunTable(
        rows=tuple(rows),
        mean_of_means=math.fsum(math.fsum(s.seconds) / len(s) for s in series) / len(series),
        pooled_mean=math.fsum(all_values) / len(all_values),
    )


# ----------------------------
# Strong scaling
# ----------------------------

@dataclass(frozen=True)
class ScalingPoint:
    resource_count: int
    time: float
    speedup: float
    efficiency: float
    ideal_speedup: float
    meets_threshold: bool


@dataclass(frozen=True)
class ScalingSeries:
    points: Tuple[ScalingPoint, ...]
    baseline_index: int
    threshold: float
    max_efficient_n: Optional[int]
    resource_label: str = "nodes"

    @property
    def baseline_n(self) -> int:
        return self.points[self.baseline_index].resource_count


def scaling_analysis(
    points: Sequence[Tuple[int, float]],
    baseline_n: Optional[int] = None,
    threshold: float = DEFAULT_EFFICIENCY_THRESHOLD,
    resource_label: str = "nodes",
) -> ScalingSeries:
    if len(points) < 2:
        raise StructuralError(f"scaling analysis needs at least 2 points, got {len(points)}")
    counts = [int(n) for n, _ in points]
    if len(set(counts)) != len(counts):
        dupes = sorted({n for n in counts if counts.count(n) > 1})
        raise StructuralError(f"duplicate resource counts: {dupes}")
    for n, t in points:
        if n < 1:
            raise DataValidationError(f"resource count must be >= 1, got {n}")
        if not math.isfinite(t) or t <= 0.0:
            raise DataValidationError(f"time at N={n} must be > 0, got {t!r}")

    ordered = sorted((int(n), float(t)) for n, t in points)
    nb = ordered[0][0] if baseline_n is None else int(baseline_n)
    base = [t for n, t in ordered if n == nb]
    if not base:
        raise StructuralError(f"baseline N={nb} is not among the points")
    tb = base[0]

    out = []
    for n, t in ordered:
        s = tb / t
        e = s * nb / n
        out.append(
            ScalingPoint(
                resource_count=n,
                time=t,
                speedup=s,
                efficiency=e,
                ideal_speedup=n / nb,
                meets_threshold=e >= threshold,
            )
        )

    efficient = [p.resource_count for p in out if p.meets_threshold]
    return ScalingSeries(
        points=tuple(out),
        baseline_index=[p.resource_count for p in out].index(nb),
        threshold=threshold,
        max_efficient_n=max(efficient) if efficient else None,
        resource_label=resource_label,
    )


@dataclass(frozen=True)
class AmdahlFit:
    parallel_fraction: float
    residual: float  # RMS error of the modeled speedups
    max_speedup: float
    baseline_n: int

    def predict(self, n: float) -> float:
        f = self.parallel_fraction
        return 1.0 / ((1.0 - f) + f * self.baseline_n / n)


def _amdahl_speedups(f: float, ns: np.ndarray, nb: int) -> np.ndarray:
    return 1.0 / ((1.0 - f) + f * nb / ns)


def amdahl_fit(series: ScalingSeries) -> AmdahlFit:
    """
    Least-squares parallel fraction on the speedup curve, f bounded to [0, 1].

    The bounded search is checked against the linearized closed form and both
    endpoints; the lowest squared error wins.
    """
    if len(series.points) < 2:
        raise StructuralError("amdahl fit needs at least 2 points")
    nb = series.baseline_n
    ns = np.array([p.resource_count for p in series.points], dtype=float)
    s = np.array([p.speedup for p in series.points], dtype=float)

    def sse(f: float) -> float:
        r = _amdahl_speedups(f, ns, nb) - s
        return float(np.dot(r, r))

    # 1 - 1/S = f * (1 - Nb/N)
    c = 1.0 - nb / ns
    linear = float(np.clip(np.dot(1.0 - 1.0 / s, c) / np.dot(c, c), 0.0, 1.0))
    bounded = minimize_scalar(sse, bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-12})

    candidates = [linear, float(bounded.x), 0.0, 1.0]
    f = min(candidates, key=sse)
    residual = math.sqrt(sse(f) / len(s))

    return AmdahlFit(
        parallel_fraction=f,
        residual=residual,
        max_speedup=math.inf if f >= 1.0 else 1.0 / (1.0 - f),
        baseline_n=nb,
    )


# ----------------------------
# Bandwidth / runtime report
# ----------------------------

@dataclass(frozen=True)
class SettingStats:
    setting: str
    node_label: str
    n: int
    mean_bandwidth: float
    best_bandwidth: float
    best_runtime: float
    mean_runtime: float
    bandwidth_cv: Optional[float]  # None with a single record

    @property
    def key(self) -> str:
        return f"{self.setting}@{self.node_label}"


@dataclass(frozen=True)
class RatioEntry:
    setting_a: str
    setting_b: str
    bandwidth_ratio: float  # best bandwidth A / best bandwidth B
    runtime_speedup: float  # best runtime B / best runtime A


@dataclass(frozen=True)
class BandwidthReport:
    settings: Tuple[SettingStats, ...]
    ratios: Tuple[RatioEntry, ...]

    def lookup(self, name: str) -> SettingStats:
        """Resolve ``setting`` or ``setting@node_label``."""
        if "@" in name:
            hits = [s for s in self.settings if s.key == name]
        else:
            hits = [s for s in self.settings if s.setting == name]
        if not hits:
            raise SettingLookupError(f"unknown setting {name!r}; known: {[s.key for s in self.settings]}")
        if len(hits) > 1:
            raise SettingLookupError(
                f"setting {name!r} is ambiguous across nodes; use one of {[s.key for s in hits]}"
            )
        return hits[0]


def bandwidth_report(
    records: Sequence[BandwidthRecord],
    pairs: Sequence[Tuple[str, str]] = (),
) -> BandwidthReport:
    if not records:
        raise EmptyResultError("bandwidth report needs at least one record")

    df = pd.DataFrame(
        [(r.setting, r.node_label, r.bandwidth, r.total_runtime) for r in records],
        columns=["setting", "node_label", "bandwidth", "runtime"],
    )
    grouped = df.groupby(["setting", "node_label"], sort=False).agg(
        n=("bandwidth", "size"),
        mean_bandwidth=("bandwidth", "mean"),
        best_bandwidth=("bandwidth", "max"),
        std_bandwidth=("bandwidth", "std"),
        best_runtime=("runtime", "min"),
        mean_runtime=("runtime", "mean"),
    )

    settings = []
    for (setting, node), row in grouped.iterrows():
        cv = None
        if row["n"] > 1:
            cv = float(row["std_bandwidth"]) / float(row["mean_bandwidth"])
        settings.append(
            SettingStats(
                setting=str(setting),
                node_label=str(node),
                n=int(row["n"]),
                mean_bandwidth=float(row["mean_bandwidth"]),
                best_bandwidth=float(row["best_bandwidth"]),
                best_runtime=float(row["best_runtime"]),
                mean_runtime=float(row["mean_runtime"]),
                bandwidth_cv=cv,
            )
        )

    report = BandwidthReport(settings=tuple(settings), ratios=())
    ratios = []
    for name_a, name_b in pairs:
        a = report.lookup(name_a)
        b = report.lookup(name_b)
        ratios.append(
            RatioEntry(
                setting_a=name_a,
                setting_b=name_b,
                bandwidth_ratio=a.best_bandwidth / b.best_bandwidth,
                runtime_speedup=b.best_runtime / a.best_runtime,
            )
        )
    return replace(report, ratios=tuple(ratios))
