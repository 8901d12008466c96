# tests/test_executor.py
import subprocess
from datetime import datetime

import pytest

from src.errors import ConfigurationError, ParseError, ResultsIndexError
from src.executor import LAUNCH_FAILURE_STATUS, execute_plan, load_results_index
from src.placement import expand_sweep, hardware_preset, plan_from_rows


def _plan(tmp_path, **kwargs):
    return expand_sweep(
        [10],
        [20, 40, 60],
        ["default", "round_robin", "block"],
        hardware_preset("broadwell36"),
        app="./app",
        workdir=str(tmp_path / "runs"),
        **kwargs,
    )


class RecordingRunner:
    """Stands in for subprocess.run and tracks how many children overlap."""

    def __init__(self, fail_labels=()):
        self.active = 0
        self.max_active = 0
        self.calls = []
        self.fail_labels = set(fail_labels)

    def __call__(self, argv, stdout, stderr, env, cwd, check):
        self.active += 1
        self.max_active = max(self.max_active, self.active)
        try:
            self.calls.append((list(argv), env["OMP_NUM_THREADS"]))
            label = stdout.name.rsplit("/", 1)[-1].rsplit("_rep", 1)[0]
            stdout.write("step,seconds\n0,1.0\n1,1.0\n")
            code = 1 if label in self.fail_labels else 0
            return subprocess.CompletedProcess(argv, code)
        finally:
            self.active -= 1


def test_dry_run_prints_every_command_and_spawns_nothing(tmp_path):
    plan = _plan(tmp_path)
    lines = []

    def runner(*a, **k):
        raise AssertionError("dry run must not spawn processes")

    arts = execute_plan(plan, "dry_run", runner=runner, echo=lines.append)
    assert len(arts) == 9
    assert len(lines) == 9
    assert all(a.exit_status is None for a in arts)
    assert sum("--distribution=block" in line for line in lines) == 3
    assert not (tmp_path / "runs").exists()


def test_run_is_sequential_and_writes_index(tmp_path):
    plan = _plan(tmp_path, repetitions=2)
    runner = RecordingRunner()
    arts = execute_plan(plan, "run", runner=runner)

    assert len(arts) == 18
    assert runner.max_active == 1
    assert [threads for _, threads in runner.calls[:2]] == ["18", "18"]
    assert all(a.ok for a in arts)

    records = load_results_index(plan.results_index)
    assert [r["run_id"] for r in records] == [a.run_id for a in arts]
    assert isinstance(records[0]["started_at"], datetime)
    assert records[0]["started_at"].tzinfo is not None
    assert records[0]["config"]["total_ranks"] == 20
    assert (tmp_path / "runs" / f"{arts[0].run_id}.log").read_text().startswith("step,seconds")


def test_failed_run_is_recorded_and_plan_continues(tmp_path):
    plan = _plan(tmp_path)
    failing = plan.configs[1].label
    arts = execute_plan(plan, "run", runner=RecordingRunner(fail_labels=[failing]))

    assert len(arts) == 9
    assert [a.exit_status for a in arts].count(1) == 1
    assert not arts[1].ok
    assert arts[2].ok


def test_missing_launcher_is_recorded(tmp_path):
    plan = _plan(tmp_path)

    def runner(argv, **kwargs):
        raise FileNotFoundError(2, "No such file or directory", argv[0])

    arts = execute_plan(plan, "run", runner=runner)
    assert all(a.exit_status == LAUNCH_FAILURE_STATUS for a in arts)
    assert all("No such file" in a.error for a in arts)


def test_unopenable_run_log_is_recorded_and_plan_continues(tmp_path):
    rows = [
        {"nodes": 1, "total_ranks": 2, "distribution": "block", "label": "missing/dir"},
        {"nodes": 1, "total_ranks": 2, "distribution": "round_robin"},
    ]
    plan = plan_from_rows(rows, hardware_preset("broadwell36"), app="./app", workdir=str(tmp_path / "runs"))
    runner = RecordingRunner()

    arts = execute_plan(plan, "run", runner=runner)
    assert [a.exit_status for a in arts] == [LAUNCH_FAILURE_STATUS, 0]
    assert "cannot open run log" in arts[0].error
    assert len(runner.calls) == 1

    records = load_results_index(plan.results_index)
    assert [r["exit_status"] for r in records] == [LAUNCH_FAILURE_STATUS, 0]


def test_unwritable_index_is_fatal(tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    plan = _plan(tmp_path, results_index=str(blocker / "index.jsonl"))
    with pytest.raises(ResultsIndexError):
        execute_plan(plan, "run", runner=RecordingRunner())


def test_unknown_mode(tmp_path):
    with pytest.raises(ConfigurationError):
        execute_plan(_plan(tmp_path), "parallel")


def test_corrupt_index_line(tmp_path):
    p = tmp_path / "index.jsonl"
    p.write_text('{"run_id": "a"}\n{oops\n')
    with pytest.raises(ParseError) as exc:
        load_results_index(p)
    assert exc.value.line_number == 2
