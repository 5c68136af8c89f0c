import json
import math

import numpy as np

from floquet_lap import io
from floquet_lap.cell import CellField, build_basis


def test_json_cleaning():
    text = io.dumps({"b": float("nan"), "a": 1 + 2j, "c": np.float64(0.1), "d": np.arange(2)})
    data = json.loads(text)
    assert list(data) == ["a", "b", "c", "d"]
    assert data["a"] == {"re": 1.0, "im": 2.0}
    assert data["b"] is None
    assert data["d"] == [0, 1]


def test_rows_round_trip(tmp_path):
    p = tmp_path / "rows.csv"
    io.write_rows_csv(p, ["x", "y"], [[0.1, 1], [math.pi, -2]])
    header, rows = io.read_rows_csv(p)
    assert header == ["x", "y"]
    assert float(rows[1][0]) == math.pi


def test_cell_round_trip(tmp_path):
    b = build_basis(3, 2)
    c = CellField.from_quasiperiodic(b.unit(1, 1) + b.unit(-2, 0) * 0.3j, 0.2 - 0.7j, 1.0)
    io.write_cell_csv(tmp_path / "c.csv", c)
    again = io.read_cell_csv(tmp_path / "c.csv")
    assert np.array_equal(again.values, c.values)


def test_matrix_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    A = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    io.write_matrix_csv(tmp_path / "A.csv", A)
    assert np.array_equal(io.read_matrix_csv(tmp_path / "A.csv"), A)
