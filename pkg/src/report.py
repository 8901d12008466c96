# src/report.py
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from src.analysis import ComparisonVerdict, CrossRunTable, ScalingSeries
from src.comparison_policy import GATE_POLICIES
from src.errors import (
    EXIT_GATE_VIOLATION,
    EXIT_OK,
    ConfigurationError,
    InsufficientDataError,
    StructuralError,
)
from src.ingest import BandwidthRecord, TimingSeries

PLOT_KINDS = ("timestep_box", "scaling_curve", "thread_scaling")
TABLE_STYLES = ("markdown", "plain")
DEFAULT_MARKER = "*"
MIN_BOX_POINTS = 5

Cell = Tuple[int, int]  # (row, column)


# ----------------------------
# Tables
# ----------------------------

@dataclass(frozen=True)
class TableSection:
    title: str
    header: Tuple[str, ...]
    rows: Tuple[Tuple[Any, ...], ...]
    formats: Tuple[str, ...] = ()  # one format spec per column; "" means default
    best_cells: FrozenSet[Cell] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        if not self.header:
            raise StructuralError(f"{self.title}: table has no columns")
        if not self.rows:
            raise StructuralError(f"{self.title}: table has no rows")
        width = len(self.header)
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise StructuralError(f"{self.title}: row {i} has {len(row)} cells, header has {width}")
        if self.formats and len(self.formats) != width:
            raise StructuralError(f"{self.title}: {len(self.formats)} formats for {width} columns")
        for r, c in self.best_cells:
            if not (0 <= r < len(self.rows) and 0 <= c < width):
                raise StructuralError(f"{self.title}: best-cell marker ({r}, {c}) is outside the table")


@dataclass(frozen=True)
class PlotReference:
    title: str
    kind: str
    path: str


Section = Union[TableSection, PlotReference]


@dataclass(frozen=True)
class ReportDocument:
    title: str
    sections: Tuple[Section, ...]
    metadata: Dict[str, Any] = field(default_factory=dict)  # tool version, timestamp, input digests


def best_cells_for(
    rows: Sequence[Sequence[Any]],
    column: int,
    mode: str = "max",
    group_column: Optional[int] = None,
) -> FrozenSet[Cell]:
    """Mark the max (or min) of ``column``, per group when ``group_column`` is given. Ties mark every winner."""
    if mode not in ("max", "min"):
        raise ConfigurationError(f"best-cell mode must be 'max' or 'min', got {mode!r}")
    groups: Dict[Any, List[int]] = {}
    for i, row in enumerate(rows):
        key = row[group_column] if group_column is not None else None
        groups.setdefault(key, []).append(i)

    pick = max if mode == "max" else min
    cells = set()
    for members in groups.values():
        best = pick(rows[i][column] for i in members)
        cells.update((i, column) for i in members if rows[i][column] == best)
    return frozenset(cells)


def _format_cell(value: Any, spec: str) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return format(value, spec or ".6g")
    if spec and isinstance(value, int) and not isinstance(value, bool):
        return format(value, spec)
    return str(value)


def render_table(section: TableSection, *, marker: str = DEFAULT_MARKER, style: str = "markdown") -> str:
    if style not in TABLE_STYLES:
        raise ConfigurationError(f"unknown table style {style!r}; expected one of {TABLE_STYLES}")
    formats = section.formats or ("",) * len(section.header)

    cells: List[List[str]] = []
    for r, row in enumerate(section.rows):
        out = []
        for c, value in enumerate(row):
            text = _format_cell(value, formats[c])
            if (r, c) in section.best_cells:
                text = marker + text
            out.append(text)
        cells.append(out)

    if style == "markdown":
        def esc(s: str) -> str:
            return s.replace("\n", " ").replace("|", "\\|")

        lines = ["| " + " | ".join(esc(h) for h in section.header) + " |"]
        lines.append("| " + " | ".join(["---"] * len(section.header)) + " |")
        lines.extend("| " + " | ".join(esc(v) for v in row) + " |" for row in cells)
        return "\n".join(lines)

    widths = [max(len(section.header[c]), *(len(row[c]) for row in cells)) for c in range(len(section.header))]
    lines = ["  ".join(h.ljust(w) for h, w in zip(section.header, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    lines.extend("  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in cells)
    return "\n".join(lines)


def render_document(doc: ReportDocument, *, marker: str = DEFAULT_MARKER, style: str = "markdown") -> str:
    blocks = [f"# {doc.title}", ""]
    for section in doc.sections:
        blocks.append(f"## {section.title}")
        blocks.append("")
        if isinstance(section, TableSection):
            blocks.append(render_table(section, marker=marker, style=style))
        else:
            blocks.append(f"Plot data ({section.kind}): `{section.path}`")
        blocks.append("")

    if doc.metadata:
        blocks.append("---")
        blocks.append("")
        for key in sorted(doc.metadata):
            blocks.append(f"- {key}: {doc.metadata[key]}")
        blocks.append("")
    return "\n".join(blocks)


# ----------------------------
# Section builders
# ----------------------------

def bandwidth_table_section(
    records: Sequence[BandwidthRecord],
    node_label: Optional[str] = None,
    *,
    title: Optional[str] = None,
) -> TableSection:
    """Bandwidth rows grouped by setting; best bandwidth (max) and best runtime (min) are marked per setting."""
    chosen = [r for r in records if node_label is None or r.node_label == node_label]
    rows = tuple((r.setting, r.bandwidth, r.total_runtime) for r in chosen)
    if not rows:
        raise StructuralError(f"no bandwidth records for node {node_label!r}")
    best = best_cells_for(rows, 1, "max", group_column=0) | best_cells_for(rows, 2, "min", group_column=0)
    return TableSection(
        title=title or f"Memory bandwidth ({node_label or 'all nodes'})",
        header=("Setting", "Bandwidth (MBytes/s)", "Total Runtime (s)"),
        rows=rows,
        formats=("", ".4f", ".2f"),
        best_cells=best,
    )


def verdict_table_section(verdicts: Sequence[ComparisonVerdict], *, title: str = "Comparisons") -> TableSection:
    rows = []
    for v in verdicts:
        rows.append((
            v.baseline_id,
            v.candidate_id,
            v.baseline_summary.mean,
            v.candidate_summary.mean,
            v.speedup,
            v.mean_test.p_value,
            v.variance_test.p_value if v.variance_test else None,
            v.baseline_summary.cv,
            v.candidate_summary.cv,
            v.verdict,
        ))
    return TableSection(
        title=title,
        header=("baseline", "candidate", "mean base (s)", "mean cand (s)", "speedup",
                "p (t)", "p (F)", "cv base", "cv cand", "verdict"),
        rows=tuple(rows),
        formats=("", "", ".2f", ".2f", ".4f", ".3g", ".3g", ".3f", ".3f", ""),
    )


def scaling_table_section(series: ScalingSeries, *, title: Optional[str] = None) -> TableSection:
    rows = tuple((p.resource_count, p.time, p.speedup, p.efficiency, p.ideal_speedup) for p in series.points)
    marked = frozenset((i, 3) for i, p in enumerate(series.points) if p.meets_threshold)
    return TableSection(
        title=title or f"Scaling over {series.resource_label} (E >= {series.threshold:g} marked)",
        header=(series.resource_label, "T (s)", "S", "E", "ideal"),
        rows=rows,
        formats=("", ".2f", ".3f", ".3f", ".3f"),
        best_cells=marked,
    )


def cross_run_table_section(table: CrossRunTable, *, title: str = "Per-step across runs") -> TableSection:
    rows = tuple((r.step, r.runs, r.mean, r.std, r.min, r.max) for r in table.rows)
    return TableSection(
        title=title,
        header=("step", "runs", "mean (s)", "std (s)", "min (s)", "max (s)"),
        rows=rows,
        formats=("", "", ".4f", ".4f", ".4f", ".4f"),
    )


# ----------------------------
# Plot data
# ----------------------------

@dataclass(frozen=True)
class FiveNumberSummary:
    n: int
    min: float
    q1: float
    median: float
    q3: float
    max: float
    outliers: Tuple[float, ...]


def five_number_summary(values: Sequence[float]) -> FiveNumberSummary:
    """Quartiles by linear interpolation between order statistics; outliers lie beyond 1.5 IQR."""
    arr = np.asarray(values, dtype=float)
    if arr.size < MIN_BOX_POINTS:
        raise InsufficientDataError(f"box summary needs at least {MIN_BOX_POINTS} points, got {arr.size}")
    lo, q1, med, q3, hi = np.quantile(arr, [0.0, 0.25, 0.5, 0.75, 1.0], method="linear")
    iqr = q3 - q1
    mask = (arr < q1 - 1.5 * iqr) | (arr > q3 + 1.5 * iqr)
    return FiveNumberSummary(
        n=int(arr.size),
        min=float(lo),
        q1=float(q1),
        median=float(med),
        q3=float(q3),
        max=float(hi),
        outliers=tuple(float(x) for x in np.sort(arr[mask])),
    )


def _num(x: float) -> str:
    return format(x, ".10g")


def _box_groups(series: Union[Mapping[str, Sequence[float]], Sequence[TimingSeries]]) -> List[Tuple[str, Sequence[float]]]:
    if isinstance(series, Mapping):
        return [(str(k), v) for k, v in series.items()]
    groups = []
    for s in series:
        if not isinstance(s, TimingSeries):
            raise ConfigurationError("timestep_box takes a mapping of groups or a list of TimingSeries")
        groups.append((s.run_id, s.seconds))
    return groups


def emit_plot_data(
    series: Any,
    kind: str,
    path: Optional[Union[str, Path]] = None,
) -> str:
    """
    Tab-separated plot data. ``timestep_box`` takes named groups of durations;
    ``scaling_curve`` and ``thread_scaling`` take a ScalingSeries.
    """
    if kind not in PLOT_KINDS:
        raise ConfigurationError(f"unknown plot kind {kind!r}; expected one of {PLOT_KINDS}")

    lines: List[str] = []
    if kind == "timestep_box":
        lines.append("\t".join(("group", "n", "min", "q1", "median", "q3", "max", "outliers")))
        for name, values in _box_groups(series):
            fn = five_number_summary(values)
            lines.append("\t".join((
                name,
                str(fn.n),
                _num(fn.min), _num(fn.q1), _num(fn.median), _num(fn.q3), _num(fn.max),
                ",".join(_num(x) for x in fn.outliers),
            )))
    else:
        if not isinstance(series, ScalingSeries):
            raise ConfigurationError(f"{kind} takes a ScalingSeries")
        axis = "threads" if kind == "thread_scaling" else series.resource_label
        lines.append("\t".join((axis, "T", "S", "E", "ideal")))
        for p in series.points:
            lines.append("\t".join((
                str(p.resource_count), _num(p.time), _num(p.speedup), _num(p.efficiency), _num(p.ideal_speedup),
            )))

    text = "\n".join(lines) + "\n"
    if path is not None:
        out = Path(path)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8")
    return text


# ----------------------------
# Regression gate
# ----------------------------

def _finite_or_str(v: Any) -> Any:
    # json cannot carry inf; perfect separation reports it as a string
    return str(v) if isinstance(v, float) and not math.isfinite(v) else v


def verdict_record(verdict: ComparisonVerdict) -> Dict[str, Any]:
    record = {
        "baseline": verdict.baseline_id,
        "candidate": verdict.candidate_id,
        "verdict": verdict.verdict,
        "speedup": verdict.speedup,
        "p_value": verdict.mean_test.p_value,
        "t_stat": verdict.mean_test.t_stat,
        "variant": verdict.mean_test.variant,
        "alpha": verdict.mean_test.alpha,
        "f_p_value": verdict.variance_test.p_value if verdict.variance_test else None,
        "cv_baseline": verdict.baseline_summary.cv,
        "cv_candidate": verdict.candidate_summary.cv,
        "std_change_fraction": verdict.std_change_fraction,
        "window": list(verdict.window),
    }
    return {k: _finite_or_str(v) for k, v in record.items()}


def regression_gate(
    verdict: ComparisonVerdict,
    policy: str = "fail_on_slower",
    *,
    echo: Callable[[str], None] = print,
) -> int:
    """Print a one-line JSON verdict and return 0 when the policy holds, 3 when it is violated."""
    if policy not in GATE_POLICIES:
        raise ConfigurationError(f"unknown gate policy {policy!r}; expected one of {GATE_POLICIES}")

    if policy == "fail_on_slower":
        violated = verdict.verdict == "slower"
    else:
        violated = verdict.verdict != "faster"

    record = verdict_record(verdict)
    record["gate"] = policy
    record["passed"] = not violated
    echo(json.dumps(record, sort_keys=True))
    return EXIT_GATE_VIOLATION if violated else EXIT_OK
