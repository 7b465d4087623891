#!/usr/bin/env python3
"""
generate_report.py

Create a human-readable Markdown report from one or more surf-rd sweep directories.
- Loads the tables a sweep writes (table.csv / table_<method>.csv, extrema.csv,
  tau_table.csv) and its provenance.json.
- Renders experiments/report_template.md by filling named placeholders if present,
  otherwise appends sections in a sensible order.
- Writes output to experiments/outputs/final_report.md and prints the path.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional

BASE = Path(__file__).resolve().parent
DEFAULT_TEMPLATE = BASE / "report_template.md"
DEFAULT_OUTDIR = BASE / "outputs"
DEFAULT_OUT = DEFAULT_OUTDIR / "final_report.md"

# acceptance bands for the mean of the last three rates
SPATIAL_BAND = (1.7, 2.3)
TEMPORAL_BAND = (0.8, 1.2)


def load_json(path: Path) -> Any:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def load_csv(path: Path) -> List[Dict[str, str]]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def save_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def load_run(run_dir: Path) -> Dict[str, Any]:
    run: Dict[str, Any] = {"path": run_dir, "tables": {}, "extrema": None, "temporal": None, "provenance": {}}
    provenance = run_dir / "provenance.json"
    if provenance.exists():
        run["provenance"] = load_json(provenance)
    for path in sorted(run_dir.glob("table*.csv")):
        method = path.stem.partition("_")[2].upper() or "RUN"
        run["tables"][method] = load_csv(path)
    if (run_dir / "extrema.csv").exists():
        run["extrema"] = load_csv(run_dir / "extrema.csv")
    if (run_dir / "tau_table.csv").exists():
        run["temporal"] = load_csv(run_dir / "tau_table.csv")
    return run


def mean_rate(rows: List[Dict[str, str]], last: int = 3) -> Optional[float]:
    rates = [float(r["rate"]) for r in rows if r.get("rate")]
    rates = rates[-last:]
    return sum(rates) / len(rates) if rates else None


def markdown_table(rows: List[Dict[str, str]]) -> str:
    if not rows:
        return "_empty_"
    header = list(rows[0].keys())
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    for row in rows:
        lines.append("| " + " | ".join(row.get(h, "") for h in header) + " |")
    return "\n".join(lines)


def verdict(value: Optional[float], band: tuple) -> str:
    if value is None:
        return "n/a"
    return "within" if band[0] <= value <= band[1] else "OUTSIDE"


def build_report_text(runs: List[Dict[str, Any]], template_text: Optional[str]) -> str:
    generated_at = datetime.now(timezone.utc).isoformat()

    summary_lines = [f"Report generated: {generated_at} (UTC)", "", f"Sweeps processed: {len(runs)}", ""]
    convergence_lines: List[str] = []
    extrema_lines: List[str] = []
    temporal_lines: List[str] = []
    provenance_lines: List[str] = []

    for run in runs:
        settings = run["provenance"].get("settings", {})
        name = settings.get("experiment", run["path"].name)
        summary_lines.append(f"- **{name}** ({run['path']})")

        for method, rows in run["tables"].items():
            rate = mean_rate(rows)
            shown = f"{rate:.3f}" if rate is not None else "n/a"
            summary_lines.append(f"  - {method}: mean rate of last three refinements {shown} "
                                 f"({verdict(rate, SPATIAL_BAND)} {SPATIAL_BAND})")
            convergence_lines += [f"### {name} {method}", "", markdown_table(rows), ""]

        if run["extrema"] is not None:
            failed = [r for r in run["extrema"] if r.get("status") != "ok"]
            summary_lines.append(f"  - extrema: {len(run['extrema'])} rows, {len(failed)} not ok")
            extrema_lines += [f"### {name}", "", markdown_table(run["extrema"]), ""]

        if run["temporal"] is not None:
            rate = mean_rate(run["temporal"])
            shown = f"{rate:.3f}" if rate is not None else "n/a"
            summary_lines.append(f"  - temporal: mean rate {shown} ({verdict(rate, TEMPORAL_BAND)} {TEMPORAL_BAND})")
            temporal_lines += [f"### {name}", "", markdown_table(run["temporal"]), ""]

        if run["provenance"]:
            prov = run["provenance"]
            provenance_lines.append(f"- {name}: surf-rd {prov.get('version')} numpy {prov.get('numpy')} "
                                    f"scipy {prov.get('scipy')} python {prov.get('python')} "
                                    f"at {prov.get('generated_at')}")

    sections = {
        "{{SUMMARY}}": "\n".join(summary_lines),
        "{{CONVERGENCE}}": "\n".join(convergence_lines) or "_no convergence sweeps_",
        "{{EXTREMA}}": "\n".join(extrema_lines) or "_no extrema sweeps_",
        "{{TEMPORAL}}": "\n".join(temporal_lines) or "_no step-size studies_",
        "{{PROVENANCE}}": "\n".join(provenance_lines) or "_no provenance files_",
    }

    if template_text:
        report_text = template_text
        for placeholder, body in sections.items():
            report_text = report_text.replace(placeholder, body)
        missing = [k for k in sections if k not in template_text]
        if missing:
            report_text = report_text.rstrip() + "\n\n" + "\n\n".join(sections[k] for k in missing)
    else:
        report_text = "\n\n".join([
            "# surf-rd sweep report",
            "## Summary", sections["{{SUMMARY}}"],
            "## Spatial convergence", sections["{{CONVERGENCE}}"],
            "## Extrema", sections["{{EXTREMA}}"],
            "## Temporal convergence", sections["{{TEMPORAL}}"],
            "## Provenance", sections["{{PROVENANCE}}"],
        ])

    footer = f"\n\n---\nReport generated by experiments/generate_report.py on {generated_at} (UTC)."
    return report_text + footer


def main(argv: Optional[List[str]] = None) -> int:
    p = argparse.ArgumentParser(description="Render a Markdown report from surf-rd sweep directories.")
    p.add_argument("--runs", "-r", type=Path, nargs="+", required=True, help="Sweep output directories")
    p.add_argument("--template", "-t", type=Path, default=DEFAULT_TEMPLATE, help="Path to report template (Markdown)")
    p.add_argument("--out", "-o", type=Path, default=DEFAULT_OUT, help="Output Markdown path")
    args = p.parse_args(argv)

    missing = [d for d in args.runs if not d.is_dir()]
    if missing:
        print(f"Error: run directory not found: {', '.join(map(str, missing))}", file=sys.stderr)
        return 2

    runs = [load_run(d) for d in args.runs]
    template_text = args.template.read_text(encoding="utf-8") if args.template.exists() else None
    report = build_report_text(runs, template_text)

    save_text(args.out, report)
    print(f"Wrote report: {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
