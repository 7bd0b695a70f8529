"""Aggregation of per-utterance metric reports into summary tables.

Summary statistics are the arithmetic mean, population standard
deviation and median over the utterances where each metric succeeded
(benchmark tables report point estimates, hence population std). STOI
additionally gets a x100 row ("stoi_pct"), the scale most published
tables use.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyInput
from .metrics import CAP_DB, MetricReport

_CAPPABLE = {"snr", "si_snr", "si_snri", "bss_sdr", "bss_sir", "bss_sar"}
_CSV_COLUMNS = ("metric", "mean", "std", "median", "count", "capped_count")


@dataclass(frozen=True)
class MetricSummary:
    mean: float
    std: float
    median: float
    count: int
    capped_count: int


@dataclass(frozen=True)
class SummaryTable:
    rows: dict[str, MetricSummary]
    metadata: dict[str, str] = field(default_factory=dict)


def aggregate(reports: list[MetricReport], metadata: dict[str, str] | None = None) -> SummaryTable:
    """Summarize reports per metric; order-independent of the input sequence."""
    if not reports:
        raise EmptyInput("no reports to aggregate")
    by_metric: dict[str, list[float]] = {}
    for report in reports:
        for name, value in report.scores.items():
            by_metric.setdefault(name, []).append(float(value))

    rows = {}
    for name in sorted(by_metric):
        values = np.asarray(by_metric[name])
        capped = int(np.count_nonzero(values >= CAP_DB)) if name in _CAPPABLE else 0
        rows[name] = MetricSummary(
            mean=float(values.mean()),
            std=float(values.std()),  # population std
            median=float(np.median(values)),
            count=int(values.size),
            capped_count=capped,
        )
    return SummaryTable(rows=rows, metadata=dict(metadata or {}))


def _rows_with_stoi_pct(table: SummaryTable) -> dict[str, MetricSummary]:
    rows = dict(table.rows)
    if "stoi" in rows:
        s = rows["stoi"]
        rows["stoi_pct"] = MetricSummary(
            mean=100.0 * s.mean,
            std=100.0 * s.std,
            median=100.0 * s.median,
            count=s.count,
            capped_count=s.capped_count,
        )
    return dict(sorted(rows.items()))


def emit(table: SummaryTable, format: str = "csv") -> str:
    """Render a summary table as csv, json or markdown text."""
    rows = _rows_with_stoi_pct(table)
    if format == "csv":
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(_CSV_COLUMNS)
        for name, s in rows.items():
            writer.writerow([name, _fmt(s.mean), _fmt(s.std), _fmt(s.median), s.count, s.capped_count])
        return out.getvalue()

    if format == "json":
        payload = {
            "metadata": dict(table.metadata),
            "rows": {
                name: {
                    "mean": s.mean,
                    "std": s.std,
                    "median": s.median,
                    "count": s.count,
                    "capped_count": s.capped_count,
                }
                for name, s in rows.items()
            },
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    if format == "markdown":
        if rows and len(rows) <= 6:
            # benchmark-table shape: metrics as columns, one mean row
            names = list(rows)
            lines = [
                "| " + " | ".join(names) + " |",
                "|" + "|".join(["---"] * len(names)) + "|",
                "| " + " | ".join(_fmt(rows[n].mean) for n in names) + " |",
            ]
            return "\n".join(lines) + "\n"
        lines = [
            "| metric | mean | std | median | count | capped_count |",
            "|---|---|---|---|---|---|",
        ]
        for name, s in rows.items():
            lines.append(
                f"| {name} | {_fmt(s.mean)} | {_fmt(s.std)} | {_fmt(s.median)} | {s.count} | {s.capped_count} |"
            )
        return "\n".join(lines) + "\n"

    raise ValueError(f"unknown format {format!r}, expected csv|json|markdown")


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def per_utterance_jsonl(reports: list[MetricReport]) -> str:
    """One JSON object per report, sorted by utterance id (deterministic)."""
    ordered = sorted(reports, key=lambda r: r.utterance_id)
    return "".join(json.dumps(r.to_dict(), sort_keys=True) + "\n" for r in ordered)


def per_utterance_csv(reports: list[MetricReport]) -> str:
    """Wide per-utterance table (one metric per column) for downstream stats."""
    names = sorted({name for r in reports for name in r.scores})
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["utterance_id", *names, "flags"])
    for r in sorted(reports, key=lambda r: r.utterance_id):
        row = [r.utterance_id]
        row += [_fmt(r.scores[n]) if n in r.scores else "" for n in names]
        row.append(";".join(r.flags))
        writer.writerow(row)
    return out.getvalue()
