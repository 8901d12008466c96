# scripts/run_report.py
import argparse
from datetime import datetime, timezone
from pathlib import Path

from src.analysis import bandwidth_report
from src.cli import TOOL_VERSION
from src.ingest import parse_bandwidth_csv, sha256_text
from src.report import ReportDocument, TableSection, bandwidth_table_section, render_document


def main():
    ap = argparse.ArgumentParser(description="Render bandwidth tables with best-value markers.")
    ap.add_argument("inputs", nargs="*", default=["eval/bandwidth_broadwell24.csv", "eval/bandwidth_cascade40.csv"])
    ap.add_argument("--pair", action="append", default=None, help="'A|B' ratio line (repeatable).")
    ap.add_argument("--out", default="reports/bandwidth/report.md")
    args = ap.parse_args()

    records = []
    digests = {}
    for path in args.inputs:
        text = Path(path).read_text(encoding="utf-8")
        digests[path] = sha256_text(text)[:12]
        records.extend(parse_bandwidth_csv(text, source=path))

    raw_pairs = args.pair or ["20 ranks 2 threads|12 ranks 2 threads"]
    pairs = [tuple(p.strip() for p in raw.split("|", 1)) for raw in raw_pairs]
    report = bandwidth_report(records, pairs)

    sections = [bandwidth_table_section(records, node) for node in dict.fromkeys(r.node_label for r in records)]
    sections.append(
        TableSection(
            title="Ratios",
            header=("A", "B", "bandwidth A/B", "runtime speedup A over B"),
            rows=tuple((r.setting_a, r.setting_b, r.bandwidth_ratio, r.runtime_speedup) for r in report.ratios),
            formats=("", "", ".4f", ".4f"),
        )
    )
    doc = ReportDocument(
        title="Memory bandwidth and runtime",
        sections=tuple(sections),
        metadata={
            "tool_version": TOOL_VERSION,
            "generated_at": datetime.now(timezone.utc).isoformat(),
            **{f"digest {p}": d for p, d in digests.items()},
        },
    )

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(render_document(doc), encoding="utf-8")
    print(out)


if __name__ == "__main__":
    main()
