"""CSV and JSON serialization of study reports.

CSV output is byte-stable: fixed column order per study kind, header always
written, RFC 4180 quoting via :mod:`csv`, ``\\n`` line endings, floats with
17 significant digits (exact round trip for doubles), and empty cells for
quantities a study does not measure. Flags are joined with ``;``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

from .study import ConvergenceReport, FitResult, StudyRow


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    if isinstance(v, (tuple, list)):
        return ";".join(str(x) for x in v)
    return str(v)


def row_cells(row: StudyRow, columns) -> list[str]:
    return [format_value(getattr(row, c)) for c in columns]


def to_csv(report: ConvergenceReport) -> str:
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
    cols = report.columns
    w.writerow(cols)
    for r in report.rows:
        w.writerow(row_cells(r, cols))
    return buf.getvalue()


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return format_value(v)
    if isinstance(v, dict):
        return {k: _json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    return v


def _fit_dict(f: FitResult | None):
    if f is None:
        return None
    return {
        "slope": f.slope,
        "intercept": f.intercept,
        "max_residual": f.max_residual,
        "ci95": f.ci95,
        "n_points": f.n_points,
        "excluded": list(f.excluded),
    }


def to_json(report: ConvergenceReport) -> str:
    doc = {
        "study_kind": report.study_kind,
        "columns": list(report.columns),
        "rows": [r.as_dict() for r in report.rows],
        "fits": {k: _fit_dict(v) for k, v in report.fits.items()},
        "uniformity_ratios": report.uniformity_ratios,
        "flags": report.flags,
        "metadata": report.metadata,
    }
    return json.dumps(_json_safe(doc), indent=2, sort_keys=True) + "\n"


def write_report(report: ConvergenceReport, path: str | Path, fmt: str = "csv") -> Path:
    """Write ``report`` to ``path``; ``fmt`` is ``"csv"`` or ``"json"``."""
    if fmt == "csv":
        text = to_csv(report)
    elif fmt == "json":
        text = to_json(report)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(text)
    return path


def read_csv_rows(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
