import numpy as np
import pytest

from hom_forecast.util import derive_seed, read_matrix_csv, write_csv, write_json


def test_derive_seed():
    assert derive_seed(0, "forecast") == derive_seed(0, "forecast")
    assert derive_seed(0, "forecast") != derive_seed(0, "simulate")
    assert derive_seed(0, "forecast") != derive_seed(1, "forecast")
    assert 0 <= derive_seed(2**63, "goftest") < 2**64


def test_write_csv_cells(tmp_path):
    path = write_csv(
        tmp_path / "sub" / "t.csv",
        ["x", "y", "z"],
        [[0.1, None, np.int64(3)], [np.float64(1 / 3), "a", 2]],
    )
    assert path.read_text() == "x,y,z\n0.1,,3\n0.3333333333333333,a,2\n"


def test_write_json_sorted(tmp_path):
    path = write_json(tmp_path / "x.json", {"b": 1, "a": [1.5]})
    assert path.read_text().splitlines()[1].strip() == '"a": ['


def test_read_matrix_csv(tmp_path):
    path = write_csv(tmp_path / "m.csv", ["step_1", "step_2"], [[1.0, 2.0], [3.0, 4.5]])
    np.testing.assert_array_equal(read_matrix_csv(path), [[1.0, 2.0], [3.0, 4.5]])
    empty = write_csv(tmp_path / "e.csv", ["step_1"], [])
    with pytest.raises(ValueError):
        read_matrix_csv(empty)
