# src/executor.py
from __future__ import annotations

import json
import logging
import os
import subprocess
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Union

from dateutil import parser as dateparser
from tqdm import tqdm

from src.errors import ConfigurationError, ParseError, ResultsIndexError
from src.placement import LaunchSpec, RunConfig, SweepPlan, build_launch_command

logger = logging.getLogger(__name__)

EXECUTION_MODES = ("dry_run", "run")
LAUNCH_FAILURE_STATUS = 127

Runner = Callable[..., "subprocess.CompletedProcess[Any]"]


@dataclass(frozen=True)
class RunArtifact:
    run_id: str
    config: RunConfig
    repetition: int
    launch: LaunchSpec
    log_path: str
    exit_status: Optional[int]  # None for dry runs
    started_at: Optional[str] = None
    finished_at: Optional[str] = None
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.exit_status == 0

    def index_record(self) -> Dict[str, Any]:
        return {
            "run_id": self.run_id,
            "label": self.config.label,
            "repetition": self.repetition,
            "config": self.config.snapshot(),
            "argv": list(self.launch.argv),
            "env": self.launch.env_dict(),
            "log_path": self.log_path,
            "exit_status": self.exit_status,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "error": self.error,
        }


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _describe(spec: LaunchSpec) -> str:
    env = " ".join(f"{k}={v}" for k, v in spec.env)
    return f"{env} {spec.command_line}".strip()


def execute_plan(
    plan: SweepPlan,
    mode: str = "dry_run",
    *,
    runner: Runner = subprocess.run,
    echo: Callable[[str], None] = print,
    cwd: Optional[str] = None,
    progress: bool = False,
) -> List[RunArtifact]:
    """
    Dry-run prints every launch command. Run mode executes one child at a time,
    writes stdout to the per-run log (stderr next to it as .err) and appends one
    JSON line per run to the results index.
    """
    if mode not in EXECUTION_MODES:
        raise ConfigurationError(f"unknown execution mode {mode!r}; expected one of {EXECUTION_MODES}")

    jobs = [
        (config, rep, build_launch_command(
            config, plan.command_template, app=plan.app, workdir=plan.workdir, repetition=rep,
        ))
        for config in plan.configs
        for rep in range(1, plan.repetitions + 1)
    ]

    if mode == "dry_run":
        artifacts = []
        for config, rep, spec in jobs:
            echo(_describe(spec))
            artifacts.append(
                RunArtifact(
                    run_id=f"{config.label}_rep{rep}",
                    config=config,
                    repetition=rep,
                    launch=spec,
                    log_path=spec.expected_log,
                    exit_status=None,
                )
            )
        return artifacts

    Path(plan.workdir).mkdir(parents=True, exist_ok=True)
    index_path = Path(plan.results_index)
    try:
        index_path.parent.mkdir(parents=True, exist_ok=True)
        index_fh = index_path.open("a", encoding="utf-8")
    except OSError as e:
        raise ResultsIndexError(f"cannot open results index {index_path}: {e}")

    artifacts: List[RunArtifact] = []
    with index_fh:
        for config, rep, spec in tqdm(jobs, disable=not progress, desc="sweep", unit="run"):
            log_path = Path(spec.expected_log)
            err_path = log_path.with_suffix(".err")
            env = {**os.environ, **spec.env_dict()}
            error: Optional[str] = None

            started = _utc_now()
            logger.info("launch %s: %s", config.label, spec.command_line)
            try:
                with log_path.open("w", encoding="utf-8") as out, err_path.open("w", encoding="utf-8") as err:
                    try:
                        proc = runner(list(spec.argv), stdout=out, stderr=err, env=env, cwd=cwd, check=False)
                        status = int(proc.returncode)
                    except OSError as e:
                        status = LAUNCH_FAILURE_STATUS
                        error = str(e)
            except OSError as e:
                # no log, no launch
                status = LAUNCH_FAILURE_STATUS
                error = f"cannot open run log {log_path}: {e}"
            finished = _utc_now()

            if status != 0:
                logger.warning("run %s_rep%d exited with status %d", config.label, rep, status)

            artifact = RunArtifact(
                run_id=f"{config.label}_rep{rep}",
                config=config,
                repetition=rep,
                launch=spec,
                log_path=str(log_path),
                exit_status=status,
                started_at=started,
                finished_at=finished,
                error=error,
            )
            artifacts.append(artifact)

            try:
                index_fh.write(json.dumps(artifact.index_record()) + "\n")
                index_fh.flush()
            except OSError as e:
                raise ResultsIndexError(f"cannot append to results index {index_path}: {e}")

    return artifacts


def load_results_index(path: Union[str, Path]) -> List[Dict[str, Any]]:
    """Read a results index back; timestamps come back as aware datetimes."""
    records: List[Dict[str, Any]] = []
    with Path(path).open("r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseError(e.msg, line_number=line_number)
            for key in ("started_at", "finished_at"):
                if rec.get(key):
                    rec[key] = dateparser.isoparse(rec[key])
            records.append(rec)
    return records
