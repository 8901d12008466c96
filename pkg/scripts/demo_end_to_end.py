# scripts/demo_end_to_end.py
import argparse
import shlex
import sys

from src.comparison_policy import ComparisonPolicy
from src.end_to_end import run_sweep_and_report
from src.placement import hardware_preset, plan_from_rows

TEMPLATE = "{app} --nodes {nodes} --ranks {total_ranks} {extra_flags}"


def _synth(effect: float, cv: float, seed: int) -> str:
    return (
        f"{shlex.quote(sys.executable)} -m src.cli synth "
        f"--mean 250 --cv {cv} --effect {effect} --seed {seed}"
    )


def main():
    ap = argparse.ArgumentParser(description="Self-hosted sweep: synthetic runs stand in for the application.")
    ap.add_argument("--out", default="reports/demo")
    ap.add_argument("--workdir", default="runs/demo")
    ap.add_argument("--cv", type=float, default=0.02)
    ap.add_argument("--effect", type=float, action="append", help="Candidate speedup fraction (repeatable).")
    ap.add_argument("--alpha", type=float, default=0.05)
    args = ap.parse_args()

    effects = args.effect or [0.0, 0.01, 0.04]
    rows = [{"nodes": 1, "total_ranks": 2, "label": "baseline", "app": _synth(0.0, args.cv, 1)}]
    for i, e in enumerate(effects, start=2):
        rows.append({
            "nodes": 1,
            "total_ranks": 2,
            "distribution": "block",
            "label": f"effect_{e:g}",
            "app": _synth(e, args.cv, i),
        })

    plan = plan_from_rows(rows, hardware_preset("broadwell36"), command_template=TEMPLATE, workdir=args.workdir)
    out = run_sweep_and_report(plan, policy=ComparisonPolicy(alpha=args.alpha), out_dir=args.out, progress=True)
    for v in out["verdicts"]:
        print(f"{v.candidate_id}: {v.verdict} (speedup {v.speedup:.4f}, p={v.mean_test.p_value:.3g})")
    print(out["report_path"])


if __name__ == "__main__":
    main()
