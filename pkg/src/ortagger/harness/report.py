"""Tabular output: TSV files for plotting tools and aligned text for terminals."""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Sequence

from .metrics import EvalReport


def _columns(rows: Sequence[dict]) -> list[str]:
    cols: list[str] = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    return cols


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.4f}"
    return str(v)


def to_tsv(rows: Sequence[dict], columns: Sequence[str] | None = None) -> str:
    cols = list(columns or _columns(rows))
    buf = io.StringIO()
    w = csv.writer(buf, delimiter="\t", lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in cols])
    return buf.getvalue()


def write_tsv(rows: Sequence[dict], path: str | Path, columns: Sequence[str] | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(to_tsv(rows, columns))
    return path


def read_tsv(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh, delimiter="\t"))


def format_table(rows: Sequence[dict], columns: Sequence[str] | None = None) -> str:
    cols = list(columns or _columns(rows))
    cells = [[_fmt(r.get(c)) for c in cols] for r in rows]
    widths = [max([len(c)] + [len(row[i]) for row in cells]) for i, c in enumerate(cols)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines.extend("  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in cells)
    return "\n".join(lines)


def report_rows(reports: dict[str, EvalReport]) -> list[dict]:
    return [r.summary_row() for r in reports.values()]


def per_label_rows(report: EvalReport) -> list[dict]:
    return [{"label": k, "precision": s.precision, "recall": s.recall, "f1": s.f1, "support": s.support}
            for k, s in report.per_label.items()]
