# src/cli.py
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from src.analysis import (
    amdahl_fit,
    bandwidth_report,
    compare_runs,
    cross_run_step_table,
    scaling_analysis,
)
from src.comparison_policy import (
    DEFAULT_ALPHA,
    DEFAULT_CI_LEVEL,
    DEFAULT_EFFICIENCY_THRESHOLD,
    DEFAULT_SAMPLE_SIZE,
    DEFAULT_WARMUP,
    GATE_POLICIES,
    SIDEDNESS,
    T_TEST_VARIANTS,
    ComparisonPolicy,
)
from src.end_to_end import run_sweep_and_report
from src.errors import EXIT_INPUT_ERROR, EXIT_NUMERICAL_ERROR, EXIT_OK, ConfigurationError, HarnessError
from src.executor import execute_plan
from src.ingest import (
    BandwidthRecord,
    TimingSeries,
    load_series,
    parse_bandwidth_csv,
    sample_first_n,
    save_series_document,
    series_digest,
    to_step_csv,
    trim_warmup,
)
from src.report import (
    PLOT_KINDS,
    TableSection,
    bandwidth_table_section,
    cross_run_table_section,
    emit_plot_data,
    regression_gate,
    render_table,
    scaling_table_section,
    verdict_record,
    verdict_table_section,
)
from src.stats_core import NOISE_SHAPES, power_estimate, summarize
from src.sweep_config import load_sweep_plan
from src.synthetic import DEFAULT_WARMUP_INFLATION, SyntheticSpec, generate_synthetic

logger = logging.getLogger(__name__)

TOOL_VERSION = "0.3.0"

_COLORS = {"faster": "32", "slower": "31", "indistinguishable": "33"}


def _env_int(name: str, default: int) -> int:
    raw = os.environ.get(name)
    if raw is None or not raw.strip():
        return default
    try:
        return int(raw)
    except ValueError:
        raise ConfigurationError(f"{name} must be an integer, got {raw!r}")


def _results_dir() -> Path:
    return Path(os.environ.get("BENCH_RESULTS_DIR") or "results")


def _paint(text: str, verdict: str, enabled: bool) -> str:
    if not enabled or verdict not in _COLORS:
        return text
    return f"\033[{_COLORS[verdict]}m{text}\033[0m"


def _style(args: argparse.Namespace) -> str:
    return "plain" if args.no_color else "markdown"


def _policy_from_args(args: argparse.Namespace) -> ComparisonPolicy:
    return ComparisonPolicy(
        alpha=args.alpha,
        variant=args.variant,
        sidedness=args.sidedness,
        paired=args.paired,
        sample_size=args.n,
        warmup=args.warmup,
        ci_level=args.ci,
    )


def _load_all(paths: Sequence[str], pattern: Optional[str]) -> List[TimingSeries]:
    return [load_series(p, line_pattern=pattern) for p in paths]


def _window(series: TimingSeries, warmup: int, n: Optional[int]) -> TimingSeries:
    series = trim_warmup(series, warmup)
    return sample_first_n(series, n) if n else series


def _parse_points(raw: Sequence[str]) -> List[Tuple[int, float]]:
    points = []
    for item in raw:
        n, sep, t = item.partition(":")
        if not sep:
            raise ConfigurationError(f"scaling point must look like N:T, got {item!r}")
        try:
            points.append((int(n), float(t)))
        except ValueError:
            raise ConfigurationError(f"scaling point must look like N:T, got {item!r}")
    return points


# ----------------------------
# Subcommands
# ----------------------------

def cmd_ingest(args: argparse.Namespace) -> int:
    series = load_series(args.input, line_pattern=args.pattern, run_id=args.run_id)
    if args.trim:
        series = _window(series, args.warmup, args.n)
    out = Path(args.out) if args.out else _results_dir() / "series" / f"{series.run_id}.json"
    path = save_series_document(series, out)
    logger.info("%s: %d steps -> %s", series.run_id, len(series), path)
    print(path)
    return EXIT_OK


def cmd_summarize(args: argparse.Namespace) -> int:
    loaded = _load_all(args.inputs, args.pattern)

    rows = []
    for s in loaded:
        w = _window(s, args.warmup, args.n)
        sm = summarize(w.seconds, args.ci)
        rows.append((s.run_id, w.indices[0], sm.n, sm.mean, sm.std, sm.cv, sm.ci_lo, sm.ci_hi))
    table = TableSection(
        title="Per-run summaries",
        header=("run", "first step", "n", "mean (s)", "std (s)", "cv", "ci lo", "ci hi"),
        rows=tuple(rows),
        formats=("", "", "", ".4f", ".4f", ".4f", ".4f", ".4f"),
    )
    print(render_table(table, style=_style(args)))

    if args.cross_run:
        trimmed = [trim_warmup(s, args.warmup) for s in loaded]
        cross = cross_run_step_table(trimmed, args.steps or None)
        print()
        print(render_table(cross_run_table_section(cross), style=_style(args)))
        print()
        print(f"mean of run means: {cross.mean_of_means:.4f}")
        print(f"pooled mean:       {cross.pooled_mean:.4f}")
    return EXIT_OK


def _append_audit(path: str, verdict_json: Dict[str, Any], base: TimingSeries, cand: TimingSeries, gate: Optional[str]) -> None:
    record = {
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "tool_version": TOOL_VERSION,
        "baseline_source": base.source,
        "candidate_source": cand.source,
        "baseline_digest": series_digest(base),
        "candidate_digest": series_digest(cand),
        "gate": gate,
        **verdict_json,
    }
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("a", encoding="utf-8") as f:
        f.write(json.dumps(record, sort_keys=True) + "\n")


def cmd_compare(args: argparse.Namespace) -> int:
    base = load_series(args.baseline, line_pattern=args.pattern)
    cand = load_series(args.candidate, line_pattern=args.pattern)
    verdict = compare_runs(base, cand, policy=_policy_from_args(args))

    if args.audit_log:
        _append_audit(args.audit_log, verdict_record(verdict), base, cand, args.gate)

    if args.gate:
        logger.info("%s vs %s: %s (speedup %.4f)", verdict.baseline_id, verdict.candidate_id, verdict.verdict, verdict.speedup)
        return regression_gate(verdict, args.gate)

    print(render_table(verdict_table_section([verdict]), style=_style(args)))
    line = f"verdict: {verdict.verdict} (speedup {verdict.speedup:.4f}, p={verdict.mean_test.p_value:.3g})"
    print(_paint(line, verdict.verdict, not args.no_color and sys.stdout.isatty()))
    for note in verdict.notes:
        print(f"note: {note}")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    plan = load_sweep_plan(args.plan)

    if args.action == "plan":
        rows = tuple(
            (c.label, c.nodes, c.total_ranks, c.ranks_per_node, c.ranks_per_socket, c.threads_per_rank,
             c.distribution, c.cores_per_socket_bind)
            for c in plan.configs
        )
        table = TableSection(
            title="Sweep plan",
            header=("label", "nodes", "ranks", "ranks/node", "ranks/socket", "threads", "distribution", "cores/socket"),
            rows=rows,
            formats=("", "", "", "", ".3g", "", "", ""),
        )
        print(render_table(table, style=_style(args)))
        return EXIT_OK

    if args.dry_run:
        execute_plan(plan, "dry_run")
        return EXIT_OK

    if args.report_dir:
        result = run_sweep_and_report(
            plan,
            policy=ComparisonPolicy(alpha=args.alpha, sample_size=args.n, warmup=args.warmup),
            out_dir=args.report_dir,
            line_pattern=args.pattern,
            progress=args.progress,
        )
        print(result["report_path"])
        return EXIT_OK

    artifacts = execute_plan(plan, "run", progress=args.progress)
    for art in artifacts:
        print(f"{art.run_id}\t{art.exit_status}\t{art.log_path}")
    return EXIT_OK


def cmd_scaling(args: argparse.Namespace) -> int:
    axis = "threads" if args.kind == "thread_scaling" else "nodes"
    series = scaling_analysis(_parse_points(args.points), args.baseline, args.threshold, resource_label=axis)
    print(render_table(scaling_table_section(series), style=_style(args)))
    print(f"largest {axis} meeting E >= {series.threshold:g}: {series.max_efficient_n}")

    if args.fit:
        fit = amdahl_fit(series)
        print(
            f"amdahl: parallel fraction {fit.parallel_fraction:.6f}, "
            f"rms residual {fit.residual:.3g}, max speedup {fit.max_speedup:.4g}"
        )
    if args.plot:
        emit_plot_data(series, args.kind, args.plot)
        logger.info("plot data -> %s", args.plot)
    return EXIT_OK


def cmd_bandwidth(args: argparse.Namespace) -> int:
    records: List[BandwidthRecord] = []
    for path in args.inputs:
        with open(path, "r", encoding="utf-8", newline="") as f:
            records.extend(parse_bandwidth_csv(f, source=path))

    pairs = []
    for raw in args.pair or ():
        a, sep, b = raw.partition("|")
        if not sep or not a.strip() or not b.strip():
            raise ConfigurationError(f"--pair must look like 'A|B', got {raw!r}")
        pairs.append((a.strip(), b.strip()))

    report = bandwidth_report(records, pairs)

    nodes = list(dict.fromkeys(r.node_label for r in records))
    for node in nodes:
        print(render_table(bandwidth_table_section(records, node), marker=args.marker, style=_style(args)))
        print()

    stats = TableSection(
        title="Per-setting statistics",
        header=("setting", "node", "n", "mean bw", "best bw", "bw cv", "mean runtime", "best runtime"),
        rows=tuple(
            (s.setting, s.node_label, s.n, s.mean_bandwidth, s.best_bandwidth, s.bandwidth_cv,
             s.mean_runtime, s.best_runtime)
            for s in report.settings
        ),
        formats=("", "", "", ".4f", ".4f", ".4f", ".2f", ".2f"),
    )
    print(render_table(stats, style=_style(args)))
    for r in report.ratios:
        print(f"{r.setting_a} vs {r.setting_b}: bandwidth ratio {r.bandwidth_ratio:.4f}, runtime speedup {r.runtime_speedup:.4f}")
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    spec = SyntheticSpec(
        mean=args.mean,
        cv=args.cv,
        n_steps=args.steps,
        warmup_steps=args.warmup_steps,
        warmup_inflation=args.inflation,
        effect_fraction=args.effect,
        seed=args.seed if args.seed is not None else _env_int("BENCH_SEED", 0),
        noise_shape=args.shape,
    )
    series = generate_synthetic(spec)
    text = to_step_csv(series)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_power(args: argparse.Namespace) -> int:
    power = power_estimate(
        args.effect,
        args.cv,
        args.n,
        alpha=args.alpha,
        trials=args.trials,
        seed=args.seed if args.seed is not None else _env_int("BENCH_SEED", 0),
        variant=args.variant,
        sidedness=args.sidedness,
        noise_shape=args.shape,
        workers=args.workers,
        progress=args.progress,
    )
    print(f"{power:.4f}")
    return EXIT_OK


def cmd_plot(args: argparse.Namespace) -> int:
    loaded = _load_all(args.inputs, args.pattern)
    windows = [_window(s, args.warmup, args.n) for s in loaded]
    text = emit_plot_data(windows, "timestep_box", args.out)
    if not args.out:
        sys.stdout.write(text)
    return EXIT_OK


# ----------------------------
# Parser
# ----------------------------

def _add_protocol_args(p: argparse.ArgumentParser, *, n_default: Optional[int] = DEFAULT_SAMPLE_SIZE) -> None:
    p.add_argument("--warmup", type=int, default=DEFAULT_WARMUP, help="Initialization steps to drop.")
    p.add_argument("--n", type=int, default=n_default, help="Steps per sample window.")
    p.add_argument("--pattern", default=None, help="Regex with named groups step and seconds for free-form logs.")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bench", description="Statistical comparison of noisy benchmark runs")
    parser.add_argument("-v", "--verbose", action="store_true", help="Log at INFO level.")
    parser.add_argument(
        "--no-color",
        action="store_true",
        default=bool(os.environ.get("NO_COLOR")),
        help="Plain output. Defaults to on when NO_COLOR is set.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="Normalize a step CSV or log into a series document.")
    p.add_argument("input")
    p.add_argument("--run-id", default=None)
    p.add_argument("--out", default=None, help="Document path. Defaults to $BENCH_RESULTS_DIR/series/<run_id>.json.")
    p.add_argument("--trim", action="store_true", help="Store the trimmed sample window instead of the raw series.")
    _add_protocol_args(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("summarize", help="Per-run summaries; optional per-step table across runs.")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--ci", type=float, default=DEFAULT_CI_LEVEL)
    p.add_argument("--cross-run", action="store_true")
    p.add_argument("--steps", type=int, nargs="*", default=None, help="Step indices for --cross-run.")
    _add_protocol_args(p)
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("compare", help="Compare a candidate run against a baseline.")
    p.add_argument("baseline")
    p.add_argument("candidate")
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--variant", choices=T_TEST_VARIANTS, default="pooled")
    p.add_argument("--paired", action="store_true", help="Step-wise paired t-test instead of two-sample.")
    p.add_argument("--sidedness", choices=SIDEDNESS, default="two_sided")
    p.add_argument("--ci", type=float, default=DEFAULT_CI_LEVEL)
    p.add_argument("--gate", choices=GATE_POLICIES, default=None)
    p.add_argument("--audit-log", default=None, help="Append one JSON line per verdict.")
    _add_protocol_args(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", help="Expand, dry-run or run a sweep plan.")
    p.add_argument("action", choices=("plan", "run"))
    p.add_argument("plan")
    p.add_argument("--dry-run", action="store_true")
    p.add_argument("--report-dir", default=None, help="After running, compare every run with the first and write a report.")
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--progress", action="store_true")
    _add_protocol_args(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("scaling", help="Speedup and efficiency from N:T points.")
    p.add_argument("points", nargs="+", help="Resource count and time, e.g. 1:100 10:14.0")
    p.add_argument("--baseline", type=int, default=None)
    p.add_argument("--threshold", type=float, default=DEFAULT_EFFICIENCY_THRESHOLD)
    p.add_argument("--fit", action="store_true", help="Fit Amdahl's law to the speedups.")
    p.add_argument("--kind", choices=("scaling_curve", "thread_scaling"), default="scaling_curve")
    p.add_argument("--plot", default=None, help="Write TSV plot data here.")
    p.set_defaults(func=cmd_scaling)

    p = sub.add_parser("bandwidth", help="Bandwidth/runtime tables with best-value markers and ratios.")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--pair", action="append", help="'A|B': bandwidth A/B and runtime speedup of A over B.")
    p.add_argument("--marker", default="*")
    p.set_defaults(func=cmd_bandwidth)

    p = sub.add_parser("synth", help="Print a seeded synthetic step CSV.")
    p.add_argument("--mean", type=float, default=250.0)
    p.add_argument("--cv", type=float, default=0.10)
    p.add_argument("--steps", type=int, default=37)
    p.add_argument("--warmup-steps", type=int, default=DEFAULT_WARMUP)
    p.add_argument("--inflation", type=float, default=DEFAULT_WARMUP_INFLATION)
    p.add_argument("--effect", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=None, help="Defaults to $BENCH_SEED or 0.")
    p.add_argument("--shape", choices=NOISE_SHAPES, default="normal")
    p.add_argument("--out", default=None)
    # accepted so synth can stand in for an application under a launcher template
    p.add_argument("--nodes", type=int, default=None)
    p.add_argument("--ranks", type=int, default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("power", help="Monte-Carlo power of the t-test.")
    p.add_argument("--effect", type=float, required=True)
    p.add_argument("--cv", type=float, required=True)
    p.add_argument("--n", type=int, default=DEFAULT_SAMPLE_SIZE)
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--seed", type=int, default=None, help="Defaults to $BENCH_SEED or 0.")
    p.add_argument("--variant", choices=T_TEST_VARIANTS, default="pooled")
    p.add_argument("--sidedness", choices=SIDEDNESS, default="two_sided")
    p.add_argument("--shape", choices=NOISE_SHAPES, default="normal")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--progress", action="store_true")
    p.set_defaults(func=cmd_power)

    p = sub.add_parser("plot", help="Box-plot data (five-number summaries) per run.")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--kind", choices=("timestep_box",), default="timestep_box")
    p.add_argument("--out", default=None)
    _add_protocol_args(p)
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args, extras = parser.parse_known_args(argv)
    if extras and args.command != "synth":
        parser.error(f"unrecognized arguments: {' '.join(extras)}")
    if extras:
        logger.debug("synth ignoring launcher flags: %s", extras)

    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )

    handler: Callable[[argparse.Namespace], int] = args.func
    try:
        return handler(args)
    except HarnessError as e:
        print(f"error [{e.code}]: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"error [io]: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except Exception:
        logger.exception("unexpected failure")
        return EXIT_NUMERICAL_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
