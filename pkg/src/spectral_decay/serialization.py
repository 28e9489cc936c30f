"""Text formats: matrix literals, bit-exact float text, deterministic JSON/CSV."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile

import numpy as np


class LiteralError(ValueError):
    """A JSON value does not have the expected literal shape."""


def _number(x, where):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise LiteralError(f"{where}: expected a number, got {x!r}")
    return float(x)


def parse_complex(x, where: str = "value") -> complex:
    """A scalar given either as a plain number or as ``[re, im]``."""
    if isinstance(x, (list, tuple)):
        if len(x) != 2:
            raise LiteralError(f"{where}: complex literal must be [re, im]")
        return complex(_number(x[0], where), _number(x[1], where))
    return complex(_number(x, where))


def parse_matrix(obj, where: str = "matrix") -> np.ndarray:
    """Nested rows of ``[re, im]`` pairs to a square complex array."""
    if not isinstance(obj, list) or not obj:
        raise LiteralError(f"{where}: expected a non-empty list of rows")
    n = len(obj)
    out = np.empty((n, n), dtype=complex)
    for i, row in enumerate(obj):
        if not isinstance(row, list):
            raise LiteralError(f"{where}[{i}]: row must be a list")
        if len(row) != n:
            raise LiteralError(f"{where}[{i}]: ragged or non-square row (length {len(row)}, expected {n})")
        for j, entry in enumerate(row):
            if not isinstance(entry, list) or len(entry) != 2:
                raise LiteralError(f"{where}[{i}][{j}]: entry must be [re, im]")
            out[i, j] = complex(_number(entry[0], f"{where}[{i}][{j}]"), _number(entry[1], f"{where}[{i}][{j}]"))
    return out


def parse_poles(obj, where: str = "poles") -> list[tuple[complex, int]]:
    """``[[[re, im], m], ...]`` to ``[(location, multiplicity), ...]``."""
    if not isinstance(obj, list):
        raise LiteralError(f"{where}: expected a list of [[re, im], m] pairs")
    poles = []
    for k, item in enumerate(obj):
        if not isinstance(item, list) or len(item) != 2 or not isinstance(item[1], int):
            raise LiteralError(f"{where}[{k}]: expected [[re, im], multiplicity]")
        poles.append((parse_complex(item[0], f"{where}[{k}]"), item[1]))
    return poles


def format_float(x: float) -> str:
    """17 significant digits, lowercase exponent; parses back to the same double."""
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"refusing to serialise non-finite value {x!r}")
    return "%.17g" % x


def complex_literal(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


def matrix_literal(m) -> list:
    return [[complex_literal(z) for z in row] for row in np.asarray(m)]


def dumps(obj, indent: int = 0) -> str:
    """JSON text with every float written by :func:`format_float`."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return dumps(complex_literal(obj), indent)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return dumps(obj.tolist(), indent)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{dumps(str(k))}: {dumps(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(x, (dict, list, tuple, np.ndarray)) for x in obj):
            return "[" + ", ".join(dumps(x, indent + 1) for x in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps(x, indent + 1) for x in obj) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_float(x) if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()


def write_atomic(files: dict[str, str]) -> None:
    """Write every ``path -> text`` pair; nothing is left behind on failure."""
    staged = []
    try:
        for path, text in files.items():
            directory = os.path.dirname(os.path.abspath(path))
            os.makedirs(directory, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
            staged.append((tmp, path))
        for tmp, path in staged:
            os.replace(tmp, path)
    finally:
        for tmp, _ in staged:
            if os.path.exists(tmp):
                os.remove(tmp)
