"""Report rendering: metric tables, curve CSVs, and percent formatting."""

from __future__ import annotations

import csv
import json
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

from .metrics import MetricsReport

TABLE_COLUMNS = (
    "Run",
    "Precision",
    "Recall",
    "F1-Score",
    "Distinct-1",
    "Distinct-2",
    "Distinct-Avg",
    "Acceptance ratio",
)

CURVE_COLUMNS = ("n", "precision", "recall", "f1", "distinct_1", "distinct_2", "distinct_avg")


def format_percent(ratio: float) -> str:
    """Ratio as a percentage with one decimal, rounding half up: 0.84 -> '84.0%'."""
    value = Decimal(str(ratio)) * 100
    return f"{value.quantize(Decimal('0.1'), rounding=ROUND_HALF_UP)}%"


def _row_values(label: str, report: MetricsReport) -> list[str]:
    ratio = report.acceptance_ratio
    return [
        label,
        f"{report.precision:.4f}",
        f"{report.recall:.4f}",
        f"{report.f1:.4f}",
        f"{report.distinct_1:.4f}",
        f"{report.distinct_2:.4f}",
        f"{report.distinct_avg:.4f}",
        format_percent(ratio) if ratio is not None else "-",
    ]


def render_metrics_table(rows: list[tuple[str, MetricsReport]]) -> str:
    """Aligned-column plain-text table, one row per (label, report)."""
    table = [list(TABLE_COLUMNS)] + [_row_values(label, report) for label, report in rows]
    widths = [max(len(r[i]) for r in table) for i in range(len(TABLE_COLUMNS))]
    lines = []
    for idx, row in enumerate(table):
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
        if idx == 0:
            lines.append("  ".join("-" * widths[i] for i in range(len(widths))).rstrip())
    return "\n".join(lines) + "\n"


def write_metrics_json(reports: list[MetricsReport], path: str | Path, run_id: str) -> None:
    payload = {
        "run_id": run_id,
        "manifest": "manifest.json",
        "reports": [r.to_record() for r in reports],
    }
    Path(path).write_text(json.dumps(payload, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")


def load_metrics_json(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def write_curve_csv(reports: list[MetricsReport], path: str | Path, run_id: str) -> None:
    """One row per generation count, ready for external plotting."""
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        fh.write(f"# run_id={run_id} manifest=manifest.json\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CURVE_COLUMNS)
        for r in reports:
            writer.writerow(
                [
                    r.generated_count,
                    r.precision,
                    r.recall,
                    r.f1,
                    r.distinct_1,
                    r.distinct_2,
                    r.distinct_avg,
                ]
            )
