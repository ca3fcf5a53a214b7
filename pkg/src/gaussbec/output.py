"""Deterministic CSV/JSON writers (12 significant digits, nulls as empty fields)."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import asdict
from pathlib import Path


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if value != value or value in (float("inf"), float("-inf")):
            return ""
        return f"{value:.12g}"
    return str(value)


def _json_value(value):
    if isinstance(value, bool) or value is None:
        return value
    if isinstance(value, float):
        if value != value or value in (float("inf"), float("-inf")):
            return None
        return float(f"{value:.12g}")
    return value


def render_csv(rows, columns, comments=()) -> str:
    buf = io.StringIO()
    for line in comments:
        buf.write(f"# {line}\r\n")
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(columns)
    for row in rows:
        d = asdict(row)
        writer.writerow([fmt(d[c]) for c in columns])
    return buf.getvalue()


def render_json(rows, columns, header=None) -> str:
    doc = {
        "header": {k: _json_value(v) for k, v in (header or {}).items()},
        "columns": list(columns),
        "rows": [{c: _json_value(asdict(r)[c]) for c in columns} for r in rows],
    }
    return json.dumps(doc, indent=2) + "\n"


def write_atomic(path: str | Path, text: str) -> None:
    """Write via a temporary file so a failed run leaves no partial output."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
