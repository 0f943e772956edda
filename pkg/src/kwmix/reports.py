"""Deterministic machine-readable output: CSV, JSON, and kernel dumps.

All floating-point values are printed with 17 significant digits so the
decimal form round-trips to the exact binary double; identical inputs
therefore produce byte-identical files.
"""

from __future__ import annotations

import math
from typing import IO, Iterable, Sequence

from .chains import Kernel


def fmt_float(x: float) -> str:
    """17-significant-digit decimal form of a finite float."""
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise TypeError(f"expected a number, got {type(x).__name__}")
    if isinstance(x, int):
        return str(x)
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite value {x}")
    return f"{x:.17g}"


def json_dumps(obj) -> str:
    """JSON text with floats rendered via fmt_float.

    The standard encoder prints shortest-round-trip floats; this one pins
    17 significant digits to match the CSV convention.
    """
    out: list[str] = []
    _write_json(obj, out)
    return "".join(out)


def _write_json(obj, out: list[str]) -> None:
    if obj is None:
        out.append("null")
    elif isinstance(obj, bool):
        out.append("true" if obj else "false")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(fmt_float(obj))
    elif isinstance(obj, str):
        out.append(_escape(obj))
    elif isinstance(obj, dict):
        out.append("{")
        for idx, (key, value) in enumerate(obj.items()):
            if idx:
                out.append(", ")
            if not isinstance(key, str):
                raise TypeError(f"JSON object keys must be strings, got {key!r}")
            out.append(_escape(key))
            out.append(": ")
            _write_json(value, out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for idx, value in enumerate(obj):
            if idx:
                out.append(", ")
            _write_json(value, out)
        out.append("]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def _escape(s: str) -> str:
    import json

    return json.dumps(s)


def csv_lines(header: Sequence[str], rows: Iterable[Sequence]) -> list[str]:
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for cell in row:
            if isinstance(cell, float):
                cells.append(fmt_float(cell))
            else:
                text = str(cell)
                if "," in text or '"' in text or "\n" in text:
                    text = '"' + text.replace('"', '""') + '"'
                cells.append(text)
        lines.append(",".join(cells))
    return lines


def dump_kernel(kernel: Kernel, fp: IO[str]) -> None:
    """Kernel dump: one JSON header line, then CSV (row, col, prob) triples."""
    header = dict(kernel.meta)
    fp.write(json_dumps(header))
    fp.write("\n")
    fp.write("row,col,prob\n")
    m = kernel.matrix.tocoo()
    order = sorted(range(m.nnz), key=lambda j: (int(m.row[j]), int(m.col[j])))
    for j in order:
        fp.write(f"{int(m.row[j])},{int(m.col[j])},{fmt_float(float(m.data[j]))}\n")


def load_kernel_dump(fp: IO[str]) -> tuple[dict, list[tuple[int, int, float]]]:
    """Inverse of dump_kernel, for round-trip checks."""
    import json

    header = json.loads(fp.readline())
    columns = fp.readline().strip()
    if columns != "row,col,prob":
        raise ValueError(f"unexpected column header {columns!r}")
    triples = []
    for line in fp:
        if not line.strip():
            continue
        r, c, p = line.split(",")
        triples.append((int(r), int(c), float(p)))
    return header, triples
