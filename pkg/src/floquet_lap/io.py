"""CSV and JSON artifact writers.

CSV files are UTF-8 with a header row and ``%.17g`` floats; JSON files use
sorted keys so identical inputs produce identical bytes.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .cell import CellField


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_rows_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def read_rows_csv(path: str | Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True)


def write_json(path: str | Path, obj) -> None:
    Path(path).write_text(dumps(obj) + "\n", encoding="utf-8")


def write_cell_csv(path: str | Path, cell: CellField) -> None:
    """Rows (i, x1, m, re, im): value of cosine mode m at Chebyshev node x1."""
    x = cell.nodes
    rows = []
    for i in range(cell.P + 1):
        for m in range(cell.M + 1):
            v = cell.values[i, m]
            rows.append([i, float(x[i]), m, float(v.real), float(v.imag)])
    write_rows_csv(path, ["i", "x1", "m", "re", "im"], rows)


def read_cell_csv(path: str | Path) -> CellField:
    _, rows = read_rows_csv(path)
    P = max(int(r[0]) for r in rows)
    M = max(int(r[2]) for r in rows)
    vals = np.zeros((P + 1, M + 1), dtype=complex)
    for r in rows:
        vals[int(r[0]), int(r[2])] = complex(float(r[3]), float(r[4]))
    return CellField(vals)


def write_matrix_csv(path: str | Path, A: np.ndarray) -> None:
    """Row-major dump with real and imaginary parts interleaved per column."""
    A = np.asarray(A, dtype=complex)
    header = []
    for j in range(A.shape[1]):
        header += [f"re_{j}", f"im_{j}"]
    rows = []
    for i in range(A.shape[0]):
        row = []
        for j in range(A.shape[1]):
            row += [float(A[i, j].real), float(A[i, j].imag)]
        rows.append(row)
    write_rows_csv(path, header, rows)


def read_matrix_csv(path: str | Path) -> np.ndarray:
    _, rows = read_rows_csv(path)
    arr = np.array([[float(v) for v in r] for r in rows])
    return arr[:, 0::2] + 1j * arr[:, 1::2]
