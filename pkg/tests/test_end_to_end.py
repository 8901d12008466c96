# tests/test_end_to_end.py
import json
import shlex
import subprocess
import sys

import pytest

from src.cli import main
from src.end_to_end import run_sweep_and_report
from src.executor import execute_plan, load_results_index
from src.placement import hardware_preset, plan_from_rows

TEMPLATE = "{app} --nodes {nodes} --ranks {total_ranks} {extra_flags}"


def _synth_app(effect, seed=5):
    return f"{shlex.quote(sys.executable)} -m src.cli synth --effect {effect} --cv 0.02 --mean 250 --seed {seed}"


@pytest.fixture
def self_hosted(repo_root, monkeypatch):
    monkeypatch.chdir(repo_root)
    monkeypatch.setenv("PYTHONPATH", str(repo_root))


def _plan(tmp_path, rows):
    return plan_from_rows(
        rows,
        hardware_preset("broadwell36"),
        command_template=TEMPLATE,
        workdir=str(tmp_path / "runs"),
    )


def test_executed_runs_feed_the_gate(self_hosted, tmp_path, capsys):
    plan = _plan(tmp_path, [
        {"nodes": 1, "total_ranks": 2, "label": "base", "app": _synth_app(0)},
        {"nodes": 1, "total_ranks": 2, "distribution": "block", "label": "cand", "app": _synth_app(0.04)},
    ])
    arts = execute_plan(plan, "run", runner=subprocess.run)
    assert [a.exit_status for a in arts] == [0, 0]
    assert [r["config"]["threads_per_rank"] for r in load_results_index(plan.results_index)] == [18, 18]

    base_log, cand_log = arts[0].log_path, arts[1].log_path
    capsys.readouterr()
    assert main(["compare", base_log, cand_log, "--gate", "fail_on_slower"]) == 0
    assert json.loads(capsys.readouterr().out)["verdict"] == "faster"
    assert main(["compare", cand_log, base_log, "--gate", "fail_on_slower"]) == 3


def test_sweep_report_collects_failures(self_hosted, tmp_path):
    plan = _plan(tmp_path, [
        {"nodes": 1, "total_ranks": 2, "label": "base", "app": _synth_app(0)},
        {"nodes": 1, "total_ranks": 2, "label": "same", "app": _synth_app(0, seed=6)},
        {"nodes": 1, "total_ranks": 2, "label": "broken", "app": f"{shlex.quote(sys.executable)} -c 'raise SystemExit(1)'"},
    ])
    out_dir = tmp_path / "report"
    result = run_sweep_and_report(plan, out_dir=str(out_dir))

    assert result["runs"] == 3
    assert result["parsed"] == 2
    assert not result["ok"]
    (verdict,) = result["verdicts"]
    assert verdict.candidate_id == "same_rep1"

    report = (out_dir / "report.md").read_text(encoding="utf-8")
    assert report.startswith("# Sweep report")
    assert "`broken_rep1`: exit status 1" in report

    log = json.loads((out_dir / "run_log.json").read_text(encoding="utf-8"))
    assert [r["ok"] for r in log["runs"]] == [True, True, False]
    assert log["comparisons"][0]["baseline"] == "base_rep1"
    assert (out_dir / "series" / "base_rep1.json").exists()
