# src/end_to_end.py
from __future__ import annotations

import json
import logging
import math
import subprocess
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Optional

from src.analysis import ComparisonVerdict, compare_runs
from src.comparison_policy import ComparisonPolicy
from src.errors import HarnessError
from src.executor import RunArtifact, Runner, execute_plan
from src.ingest import TimingSeries, load_series, save_series_document, series_digest
from src.placement import SweepPlan
from src.report import render_table, verdict_record, verdict_table_section

logger = logging.getLogger(__name__)


def _json_safe(obj: Any) -> Any:
    if obj is None or isinstance(obj, (str, int, bool)):
        return obj
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else str(obj)
    if isinstance(obj, (tuple, list)):
        return [_json_safe(x) for x in obj]
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if hasattr(obj, "__dict__"):
        return _json_safe(obj.__dict__.copy())
    return str(obj)


def _load_run(artifact: RunArtifact, line_pattern: Optional[str]) -> TimingSeries:
    series = load_series(artifact.log_path, line_pattern=line_pattern, run_id=artifact.run_id)
    return replace(series, config=artifact.config.snapshot())


def run_sweep_and_report(
    plan: SweepPlan,
    *,
    policy: Optional[ComparisonPolicy] = None,
    out_dir: Optional[str] = "reports/sweep",
    runner: Runner = subprocess.run,
    line_pattern: Optional[str] = None,
    progress: bool = False,
) -> Dict[str, Any]:
    """
    End-to-end: execute plan -> parse logs -> compare every run with the first -> markdown report + JSON log.

    Failed runs and unparseable logs are reported, not raised.
    """
    policy = policy or ComparisonPolicy()
    artifacts = execute_plan(plan, "run", runner=runner, progress=progress)

    out_path = Path(out_dir) if out_dir else None
    logs: List[Dict[str, Any]] = []
    loaded: List[TimingSeries] = []

    for art in artifacts:
        entry: Dict[str, Any] = {
            "run_id": art.run_id,
            "label": art.config.label,
            "exit_status": art.exit_status,
            "log_path": art.log_path,
        }
        if not art.ok:
            entry["ok"] = False
            entry["error"] = art.error or f"exit status {art.exit_status}"
            logs.append(entry)
            continue
        try:
            series = _load_run(art, line_pattern)
        except HarnessError as e:
            logger.warning("cannot parse %s: %s", art.log_path, e)
            entry["ok"] = False
            entry["error"] = f"{e.code}: {e}"
            logs.append(entry)
            continue

        entry["ok"] = True
        entry["steps"] = len(series)
        entry["digest"] = series_digest(series)
        if out_path:
            entry["series_document"] = str(save_series_document(series, out_path / "series" / f"{series.run_id}.json"))
        loaded.append(series)
        logs.append(entry)

    verdicts: List[ComparisonVerdict] = []
    comparison_errors: List[Dict[str, str]] = []
    if loaded:
        baseline = loaded[0]
        for cand in loaded[1:]:
            try:
                verdicts.append(compare_runs(baseline, cand, policy=policy))
            except HarnessError as e:
                logger.warning("cannot compare %s with %s: %s", baseline.run_id, cand.run_id, e)
                comparison_errors.append({"candidate": cand.run_id, "error": f"{e.code}: {e}"})

    md_blocks: List[str] = []
    md_blocks.append("# Sweep report")
    md_blocks.append("")
    md_blocks.append("## Executive summary")
    md_blocks.append(f"- Runs: {len(artifacts)} ({sum(a.ok for a in artifacts)} exited 0)")
    md_blocks.append(f"- Parsed series: {len(loaded)}")
    if loaded:
        md_blocks.append(f"- Baseline: `{loaded[0].run_id}`")
    md_blocks.append(
        f"- Protocol: drop {policy.warmup} warmup steps, first {policy.sample_size} steps, "
        f"{policy.variant} t-test at alpha={policy.alpha:g}"
    )
    md_blocks.append("")

    if verdicts:
        md_blocks.append(render_table(verdict_table_section(verdicts)))
        md_blocks.append("")

    failed = [e for e in logs if not e["ok"]] + comparison_errors
    if failed:
        md_blocks.append("## Failures")
        md_blocks.append("")
        for e in failed:
            md_blocks.append(f"- `{e.get('run_id', e.get('candidate'))}`: {e['error']}")
        md_blocks.append("")

    md_file = None
    json_file = None
    if out_path:
        out_path.mkdir(parents=True, exist_ok=True)
        md_file = out_path / "report.md"
        json_file = out_path / "run_log.json"
        md_file.write_text("\n".join(md_blocks), encoding="utf-8")
        json_file.write_text(
            json.dumps(
                _json_safe({
                    "runs": logs,
                    "comparisons": [verdict_record(v) for v in verdicts],
                    "comparison_errors": comparison_errors,
                }),
                indent=2,
            ),
            encoding="utf-8",
        )

    return {
        "ok": not failed,
        "runs": len(artifacts),
        "parsed": len(loaded),
        "verdicts": verdicts,
        "report_path": str(md_file) if md_file else None,
        "run_log_path": str(json_file) if json_file else None,
    }
