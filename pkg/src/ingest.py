# src/ingest.py
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Iterable, List, NamedTuple, Optional, Pattern, Tuple, Union

from src.comparison_policy import DEFAULT_SAMPLE_SIZE, DEFAULT_WARMUP, MIN_NORMAL_SAMPLE
from src.errors import (
    ConfigurationError,
    DataValidationError,
    EmptyExtractionError,
    EmptyResultError,
    InsufficientDataError,
    ParseError,
    StructuralError,
)

logger = logging.getLogger(__name__)

STEP_CSV_HEADER = "step,seconds"
BANDWIDTH_CSV_HEADER = "setting,bandwidth_mbytes_per_s,total_runtime_s,node_label"
SERIES_DOCUMENT_SCHEMA = "timing-series/1"

TextSource = Union[str, Iterable[str]]


# ----------------------------
# Data model
# ----------------------------

class Step(NamedTuple):
    index: int
    seconds: float


@dataclass(frozen=True)
class TimingSeries:
    run_id: str
    source: str
    steps: Tuple[Step, ...]
    config: Optional[Dict[str, Any]] = None  # RunConfig snapshot
    trimmed: bool = False
    warmup_count: int = 0
    sample_size_used: Optional[int] = None
    annotations: Tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        prev: Optional[int] = None
        for step in self.steps:
            if step.index < 0:
                raise DataValidationError(f"{self.run_id}: negative step index {step.index}")
            if not math.isfinite(step.seconds) or step.seconds <= 0.0:
                raise DataValidationError(
                    f"{self.run_id}: step {step.index} has invalid duration {step.seconds!r}"
                )
            if prev is not None and step.index <= prev:
                raise StructuralError(
                    f"{self.run_id}: step index {step.index} does not increase after {prev}"
                )
            prev = step.index
        if self.trimmed and self.steps and self.steps[0].index < self.warmup_count:
            raise StructuralError(f"{self.run_id}: trimmed series still holds warmup steps")

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def indices(self) -> List[int]:
        return [s.index for s in self.steps]

    @property
    def seconds(self) -> List[float]:
        return [s.seconds for s in self.steps]


@dataclass(frozen=True)
class BandwidthRecord:
    setting: str
    bandwidth: float  # MBytes/s
    total_runtime: float  # seconds
    node_label: str

    def __post_init__(self) -> None:
        if not self.setting.strip():
            raise DataValidationError("bandwidth record has an empty setting label")
        if not math.isfinite(self.bandwidth) or self.bandwidth <= 0.0:
            raise DataValidationError(f"{self.setting}: bandwidth must be > 0, got {self.bandwidth!r}")
        if not math.isfinite(self.total_runtime) or self.total_runtime <= 0.0:
            raise DataValidationError(
                f"{self.setting}: total runtime must be > 0, got {self.total_runtime!r}"
            )


# ----------------------------
# Helpers
# ----------------------------

def _lines(stream: TextSource) -> Iterable[str]:
    if isinstance(stream, str):
        return io.StringIO(stream)
    return stream


def _default_run_id(source: str) -> str:
    stem = Path(source).stem if source and not source.startswith("<") else ""
    return stem or "series"


class _StepAccumulator:
    def __init__(self) -> None:
        self.steps: List[Step] = []

    def add(self, line_number: int, raw_step: str, raw_seconds: str) -> None:
        try:
            index = int(raw_step.strip())
        except ValueError:
            raise ParseError(f"step index {raw_step.strip()!r} is not an integer", line_number=line_number)
        try:
            seconds = float(raw_seconds.strip())
        except ValueError:
            raise ParseError(f"duration {raw_seconds.strip()!r} is not a number", line_number=line_number)

        if index < 0:
            raise DataValidationError(f"line {line_number}: negative step index {index}")
        if not math.isfinite(seconds):
            raise DataValidationError(f"line {line_number}: duration is not finite")
        if seconds <= 0.0:
            raise DataValidationError(f"line {line_number}: duration must be > 0, got {seconds!r}")
        if self.steps and index <= self.steps[-1].index:
            what = "duplicate" if index == self.steps[-1].index else "decreasing"
            raise StructuralError(
                f"line {line_number}: {what} step index {index} after {self.steps[-1].index}"
            )
        self.steps.append(Step(index, seconds))


# ----------------------------
# Step CSV
# ----------------------------

def parse_step_csv(
    stream: TextSource,
    *,
    run_id: Optional[str] = None,
    source: str = "<stream>",
) -> TimingSeries:
    acc = _StepAccumulator()
    header_seen = False

    for line_number, raw in enumerate(_lines(stream), start=1):
        line = raw.strip("\r\n").strip()
        if not header_seen:
            line = line.lstrip("\ufeff")
            if not line:
                continue
            if line.replace(" ", "") != STEP_CSV_HEADER:
                raise ParseError(f"expected header {STEP_CSV_HEADER!r}, got {line[:60]!r}", line_number=line_number)
            header_seen = True
            continue
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ParseError(f"expected 2 fields, got {len(parts)}", line_number=line_number)
        acc.add(line_number, parts[0], parts[1])

    if not header_seen:
        raise ParseError(f"missing header {STEP_CSV_HEADER!r}", line_number=1)
    if not acc.steps:
        raise EmptyExtractionError(f"{source}: no timing records after header")

    return TimingSeries(run_id=run_id or _default_run_id(source), source=source, steps=tuple(acc.steps))


def to_step_csv(series: TimingSeries) -> str:
    # repr() keeps floats exact across a parse round trip
    lines = [STEP_CSV_HEADER]
    lines.extend(f"{s.index},{s.seconds!r}" for s in series.steps)
    return "\n".join(lines) + "\n"


# ----------------------------
# Free-form logs
# ----------------------------

_PCRE_GROUP_RE = re.compile(r"\(\?<(?![=!])")


def compile_step_pattern(pattern: str) -> Pattern[str]:
    """
    Compile a step-timing line pattern.

    Both ``(?P<name>...)`` and ``(?<name>...)`` group syntax are accepted;
    the pattern must define the groups ``step`` and ``seconds``.
    """
    try:
        regex = re.compile(_PCRE_GROUP_RE.sub("(?P<", pattern))
    except re.error as e:
        raise ConfigurationError(f"invalid line pattern: {e}")
    missing = [g for g in ("step", "seconds") if g not in regex.groupindex]
    if missing:
        raise ConfigurationError(f"line pattern lacks named capture(s): {', '.join(missing)}")
    return regex


def parse_step_log(
    stream: TextSource,
    line_pattern: Union[str, Pattern[str]],
    *,
    run_id: Optional[str] = None,
    source: str = "<stream>",
) -> TimingSeries:
    regex = compile_step_pattern(line_pattern if isinstance(line_pattern, str) else line_pattern.pattern)

    acc = _StepAccumulator()
    for line_number, raw in enumerate(_lines(stream), start=1):
        m = regex.search(raw)
        if not m:
            continue
        acc.add(line_number, m.group("step") or "", m.group("seconds") or "")

    if not acc.steps:
        raise EmptyExtractionError(f"{source}: no lines matched pattern {regex.pattern!r}")

    return TimingSeries(run_id=run_id or _default_run_id(source), source=source, steps=tuple(acc.steps))


# ----------------------------
# Sampling protocol
# ----------------------------

def trim_warmup(series: TimingSeries, warmup_count: int = DEFAULT_WARMUP) -> TimingSeries:
    """Drop initialization steps (step_index < warmup_count)."""
    if warmup_count < 0:
        raise ConfigurationError(f"warmup_count must be >= 0, got {warmup_count}")
    if not series.steps:
        raise EmptyResultError(f"{series.run_id}: cannot trim an empty series")

    kept = tuple(s for s in series.steps if s.index >= warmup_count)
    if not kept:
        raise EmptyResultError(
            f"{series.run_id}: trimming {warmup_count} warmup steps leaves nothing "
            f"(last step index is {series.steps[-1].index})"
        )
    return replace(
        series,
        steps=kept,
        trimmed=True,
        warmup_count=max(series.warmup_count, warmup_count),
    )


def sample_first_n(series: TimingSeries, n: int = DEFAULT_SAMPLE_SIZE) -> TimingSeries:
    """Keep the first ``n`` steps; both sides of a comparison must use the same window."""
    if n < 2:
        raise ConfigurationError(f"sample size must be >= 2, got {n}")
    if len(series) < n:
        raise InsufficientDataError(
            f"{series.run_id}: sample of {n} steps requested but only {len(series)} available"
        )

    annotations = series.annotations
    if n < MIN_NORMAL_SAMPLE:
        note = f"sample size {n} is below {MIN_NORMAL_SAMPLE}; normal approximation is weak"
        logger.warning("%s: %s", series.run_id, note)
        annotations = annotations + (note,)

    return replace(series, steps=series.steps[:n], sample_size_used=n, annotations=annotations)


# ----------------------------
# Bandwidth CSV
# ----------------------------

def parse_bandwidth_csv(stream: TextSource, *, source: str = "<stream>") -> List[BandwidthRecord]:
    records: List[BandwidthRecord] = []
    header_seen = False

    for line_number, raw in enumerate(_lines(stream), start=1):
        line = raw.strip("\r\n").strip()
        if not header_seen:
            line = line.lstrip("\ufeff")
            if not line:
                continue
            if line.replace(" ", "") != BANDWIDTH_CSV_HEADER:
                raise ParseError(f"expected header {BANDWIDTH_CSV_HEADER!r}", line_number=line_number)
            header_seen = True
            continue
        if not line:
            continue

        try:
            fields = next(csv.reader([line]))
        except csv.Error as e:
            raise ParseError(str(e), line_number=line_number)
        if len(fields) != 4:
            raise ParseError(f"expected 4 fields, got {len(fields)}", line_number=line_number)

        setting, raw_bw, raw_rt, node_label = (f.strip() for f in fields)
        try:
            bandwidth = float(raw_bw)
            runtime = float(raw_rt)
        except ValueError:
            raise ParseError("bandwidth and runtime must be numbers", line_number=line_number)

        try:
            records.append(BandwidthRecord(setting, bandwidth, runtime, node_label))
        except DataValidationError as e:
            raise DataValidationError(f"line {line_number}: {e}")

    if not header_seen:
        raise ParseError(f"missing header {BANDWIDTH_CSV_HEADER!r}", line_number=1)
    if not records:
        raise EmptyExtractionError(f"{source}: no bandwidth records after header")
    return records


# ----------------------------
# Normalized series documents
# ----------------------------

def sha256_text(s: str) -> str:
    return hashlib.sha256(s.encode("utf-8")).hexdigest()


def series_digest(series: TimingSeries) -> str:
    return sha256_text(to_step_csv(series))


def series_to_document(series: TimingSeries) -> Dict[str, Any]:
    return {
        "schema": SERIES_DOCUMENT_SCHEMA,
        "run_id": series.run_id,
        "source": series.source,
        "config": series.config,
        "trimmed": series.trimmed,
        "warmup_count": series.warmup_count,
        "sample_size_used": series.sample_size_used,
        "annotations": list(series.annotations),
        "steps": [[s.index, s.seconds] for s in series.steps],
        "digest": series_digest(series),
    }


def series_from_document(obj: Dict[str, Any]) -> TimingSeries:
    if obj.get("schema") != SERIES_DOCUMENT_SCHEMA:
        raise ParseError(f"unsupported series document schema {obj.get('schema')!r}", line_number=1)
    try:
        series = TimingSeries(
            run_id=str(obj["run_id"]),
            source=str(obj.get("source", "")),
            steps=tuple(Step(int(i), float(s)) for i, s in obj["steps"]),
            config=obj.get("config"),
            trimmed=bool(obj.get("trimmed", False)),
            warmup_count=int(obj.get("warmup_count", 0)),
            sample_size_used=obj.get("sample_size_used"),
            annotations=tuple(obj.get("annotations", ())),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ParseError(f"malformed series document: {e}", line_number=1)

    expected = obj.get("digest")
    if expected and expected != series_digest(series):
        raise DataValidationError(f"{series.run_id}: digest mismatch; document was edited or truncated")
    return series


def save_series_document(series: TimingSeries, path: Union[str, Path]) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(series_to_document(series), indent=2), encoding="utf-8")
    return out


def load_series_document(path: Union[str, Path]) -> TimingSeries:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: {e.msg}", line_number=e.lineno)
    return series_from_document(obj)


def load_series(
    path: Union[str, Path],
    *,
    line_pattern: Optional[str] = None,
    run_id: Optional[str] = None,
) -> TimingSeries:
    """Load a series from a normalized document (.json), a step CSV, or a free-form log."""
    p = Path(path)
    if p.suffix == ".json":
        return load_series_document(p)
    try:
        with p.open("r", encoding="utf-8", newline="") as f:
            if line_pattern:
                return parse_step_log(f, line_pattern, run_id=run_id, source=str(p))
            return parse_step_csv(f, run_id=run_id, source=str(p))
    except UnicodeDecodeError as e:
        raise ParseError(f"{p}: not UTF-8 text ({e.reason})", line_number=1)
