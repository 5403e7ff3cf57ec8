"""Deterministic CSV/JSON writers.

Floats are written with ``repr`` so identical inputs give byte-identical
files and values round-trip exactly.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np


def _fmt(x) -> str:
    if isinstance(x, (str, bytes)):
        return str(x)
    x = float(x)
    if np.isnan(x):
        return "nan"
    return repr(x)


def write_csv(path, header, columns) -> Path:
    """Write equal-length columns under ``header``."""
    path = Path(path)
    cols = [np.asarray(c).ravel() for c in columns]
    n = len(cols[0])
    if any(len(c) != n for c in cols):
        raise ValueError("columns differ in length")
    lines = [",".join(header)]
    for i in range(n):
        lines.append(",".join(_fmt(c[i]) for c in cols))
    path.write_text("\n".join(lines) + "\n")
    return path


def write_matrix_csv(path, corner, col_axis, row_axis, matrix) -> Path:
    """A 2D map: header row is ``corner`` + column axis, then one row per row-axis value."""
    path = Path(path)
    lines = [",".join([corner] + [_fmt(c) for c in col_axis])]
    for r, row in zip(row_axis, np.asarray(matrix)):
        lines.append(",".join([_fmt(r)] + [_fmt(v) for v in row]))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_csv(path):
    """Return ``(header, array)`` for a CSV written by :func:`write_csv`."""
    text = Path(path).read_text().splitlines()
    header = text[0].split(",")
    data = np.array([[float(v) for v in line.split(",")] for line in text[1:] if line])
    return header, data


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if np.isfinite(x) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps(obj))
    return path


def content_hash(obj, length: int = 12) -> str:
    """Short SHA-256 digest of the canonical JSON form of ``obj``."""
    canon = json.dumps(_jsonable(obj), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:length]
