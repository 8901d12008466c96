# tests/test_report.py
import json
import math
from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from src.analysis import compare_runs, scaling_analysis
from src.errors import ConfigurationError, InsufficientDataError, StructuralError
from src.ingest import parse_bandwidth_csv
from src.report import (
    PlotReference,
    ReportDocument,
    TableSection,
    bandwidth_table_section,
    best_cells_for,
    emit_plot_data,
    five_number_summary,
    regression_gate,
    render_document,
    render_table,
    scaling_table_section,
    verdict_record,
)
from tests.conftest import make_series


@pytest.fixture
def broadwell_records(fixtures_dir):
    return parse_bandwidth_csv((fixtures_dir / "bandwidth_broadwell24.csv").read_text(encoding="utf-8"))


@pytest.fixture
def verdict():
    s = make_series([1.0 + 0.01 * (i % 7) for i in range(37)], run_id="base")
    c = make_series([1.0 + 0.01 * (i % 5) for i in range(37)], run_id="cand")
    return compare_runs(s, c)


# ----------------------------
# Tables
# ----------------------------

def test_bandwidth_table_marks_best_cells_per_setting(broadwell_records):
    section = bandwidth_table_section(broadwell_records, "broadwell24")
    text = render_table(section)
    assert "*16228.4178" in text
    assert "*16201.49" in text
    assert "*8092.9993" in text and "*28883.01" in text
    # best bandwidth and best runtime of 12r2t sit in different rows
    assert (1, 1) in section.best_cells
    assert (2, 2) in section.best_cells
    assert text.count("*") == 4


def test_custom_marker(broadwell_records):
    text = render_table(bandwidth_table_section(broadwell_records), marker="**")
    assert "**16228.4178" in text


def test_plain_style_has_no_pipes(broadwell_records):
    text = render_table(bandwidth_table_section(broadwell_records), style="plain")
    assert "|" not in text
    assert text.splitlines()[0].startswith("Setting")


def test_table_requires_rows_and_matching_widths():
    with pytest.raises(StructuralError):
        TableSection(title="t", header=("a", "b"), rows=())
    with pytest.raises(StructuralError):
        TableSection(title="t", header=("a", "b"), rows=(("x", 1.0), ("y",)))
    with pytest.raises(StructuralError):
        TableSection(title="t", header=("a",), rows=((1.0,),), best_cells=frozenset({(0, 3)}))


def test_single_cell_table_is_its_own_best():
    rows = ((42.0,),)
    section = TableSection(title="one", header=("v",), rows=rows, best_cells=best_cells_for(rows, 0))
    assert "*42" in render_table(section)


def test_best_cells_ties_mark_every_winner():
    rows = (("a", 3.0), ("a", 3.0), ("b", 1.0))
    assert best_cells_for(rows, 1, "max", group_column=0) == {(0, 1), (1, 1), (2, 1)}
    assert best_cells_for(rows, 1, "min") == {(2, 1)}
    with pytest.raises(ConfigurationError):
        best_cells_for(rows, 1, "median")


def test_markdown_escapes_pipes():
    section = TableSection(title="t", header=("name",), rows=(("a|b",),))
    assert "a\\|b" in render_table(section)


def test_scaling_table_marks_efficient_points():
    series = scaling_analysis([(1, 100.0), (10, 14.0), (20, 9.0)])
    section = scaling_table_section(series)
    assert section.best_cells == {(0, 3), (1, 3)}


def test_render_document_is_deterministic(broadwell_records, verdict):
    doc = ReportDocument(
        title="Nightly",
        sections=(
            bandwidth_table_section(broadwell_records),
            PlotReference(title="Steps", kind="timestep_box", path="plots/steps.tsv"),
        ),
        metadata={"tool_version": "0.3.0", "generated_at": "2026-01-01T00:00:00+00:00"},
    )
    a = render_document(doc)
    assert a == render_document(doc)
    assert a.startswith("# Nightly")
    assert "`plots/steps.tsv`" in a
    assert a.index("- generated_at") < a.index("- tool_version")


# ----------------------------
# Plot data
# ----------------------------

def test_five_number_summary_of_one_to_thirty_five():
    fn = five_number_summary(list(range(1, 36)))
    assert (fn.min, fn.q1, fn.median, fn.q3, fn.max) == (1.0, 9.5, 18.0, 26.5, 35.0)
    assert fn.outliers == ()


def test_five_number_summary_constant():
    fn = five_number_summary([5.0] * 5)
    assert fn.min == fn.q1 == fn.median == fn.q3 == fn.max == 5.0
    assert fn.outliers == ()


def test_five_number_summary_needs_five_points():
    with pytest.raises(InsufficientDataError):
        five_number_summary([1.0, 2.0, 3.0, 4.0])


def test_five_number_summary_matches_pandas():
    values = np.random.default_rng(11).normal(100.0, 10.0, 57)
    fn = five_number_summary(values.tolist())
    q = pd.Series(values).quantile([0.25, 0.5, 0.75])
    assert fn.q1 == pytest.approx(q.iloc[0], abs=1e-12)
    assert fn.median == pytest.approx(q.iloc[1], abs=1e-12)
    assert fn.q3 == pytest.approx(q.iloc[2], abs=1e-12)


def test_outliers_beyond_one_and_a_half_iqr():
    fn = five_number_summary([10.0, 10.0, 10.0, 11.0, 11.0, 11.0, 40.0])
    assert fn.outliers == (40.0,)


def test_box_plot_data_per_run(tmp_path):
    runs = [make_series(list(range(1, 36)), run_id="a"), make_series([2.0] * 6, run_id="b")]
    out = tmp_path / "plots" / "box.tsv"
    text = emit_plot_data(runs, "timestep_box", out)
    lines = text.splitlines()
    assert lines[0].split("\t")[:3] == ["group", "n", "min"]
    assert lines[1].split("\t")[:7] == ["a", "35", "1", "9.5", "18", "26.5", "35"]
    assert out.read_text(encoding="utf-8") == text


def test_scaling_curve_ideal_column():
    series = scaling_analysis([(1, 100.0), (2, 50.0)])
    lines = emit_plot_data(series, "scaling_curve").splitlines()
    assert lines[0].startswith("nodes\t")
    assert [row.split("\t")[-1] for row in lines[1:]] == ["1", "2"]
    assert emit_plot_data(series, "thread_scaling").startswith("threads\t")


def test_scaling_curve_uses_the_series_resource_axis():
    series = scaling_analysis([(1, 100.0), (2, 52.0), (4, 27.0)], resource_label="gpus")
    lines = emit_plot_data(series, "scaling_curve").splitlines()
    assert lines[0].split("\t")[0] == "gpus"
    assert [row.split("\t")[0] for row in lines[1:]] == ["1", "2", "4"]
    assert emit_plot_data(series, "thread_scaling").startswith("threads\t")


def test_plot_kind_validation():
    with pytest.raises(ConfigurationError):
        emit_plot_data({}, "violin")
    with pytest.raises(ConfigurationError):
        emit_plot_data({"a": [1.0] * 5}, "scaling_curve")


# ----------------------------
# Regression gate
# ----------------------------

@pytest.mark.parametrize(
    "label,policy,code",
    [
        ("slower", "fail_on_slower", 3),
        ("indistinguishable", "fail_on_slower", 0),
        ("faster", "fail_on_slower", 0),
        ("indistinguishable", "fail_on_not_faster", 3),
        ("faster", "fail_on_not_faster", 0),
    ],
)
def test_gate_exit_codes(verdict, label, policy, code):
    lines = []
    assert regression_gate(replace(verdict, verdict=label), policy, echo=lines.append) == code
    assert len(lines) == 1
    record = json.loads(lines[0])
    assert record["verdict"] == label
    assert record["gate"] == policy
    assert record["passed"] is (code == 0)


def test_gate_rejects_unknown_policy(verdict):
    with pytest.raises(ConfigurationError):
        regression_gate(verdict, "fail_on_anything", echo=lambda _: None)


def test_verdict_record_is_json_safe_under_perfect_separation():
    v = compare_runs(make_series([5.0] * 37, run_id="b"), make_series([4.0] * 37, run_id="c"))
    record = verdict_record(v)
    assert record["t_stat"] == "inf"
    assert record["f_p_value"] is None
    text = json.dumps(record, allow_nan=False)
    assert math.isclose(json.loads(text)["speedup"], 1.25)
