"""Byte-stable CSV and JSON emission."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

__all__ = ["format_value", "to_csv", "to_json", "emit"]


def format_value(v) -> str:
    """Cell text: 12 significant digits for reals, ``true``/``false``, empty for ``None``."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".12g")
    if isinstance(v, (list, tuple)):
        return ";".join(format_value(x) for x in v)
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isfinite(v):
            return float(format(v, ".12g"))
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    return v


def to_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = list(report["columns"])
    w.writerow(cols)
    for row in report.get("rows", []):
        w.writerow([format_value(row.get(c)) for c in cols])
    return buf.getvalue()


def to_json(report: dict) -> str:
    return json.dumps(_jsonable(report), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def emit(report: dict, fmt: str, path: str | Path) -> Path:
    """Write ``report`` as CSV (its ``columns``/``rows`` table) or JSON (the whole object)."""
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown format {fmt!r}")
    path = Path(path)
    text = to_csv(report) if fmt == "csv" else to_json(report)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path
