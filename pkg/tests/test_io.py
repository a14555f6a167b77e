import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from rescale.io import read_csv, read_field, text_hash, write_csv, write_field, write_rows


@given(arrays(float, st.integers(1, 30), elements=st.floats(allow_nan=False, allow_infinity=False)))
def test_csv_round_trip_is_exact(tmp_path_factory, a):
    p = tmp_path_factory.mktemp("csv") / "a.csv"
    write_csv(p, ["i", "x"], [np.arange(len(a)), a])
    cols = read_csv(p)
    assert np.array_equal(cols["x"], a)
    assert np.array_equal(cols["i"], np.arange(len(a)))


def test_csv_format(tmp_path):
    write_csv(tmp_path / "a.csv", ["t", "v"], [[0, 1], [0.1, 2.5]])
    raw = (tmp_path / "a.csv").read_bytes()
    assert raw == b"t,v\n0,0.1\n1,2.5\n"
    write_rows(tmp_path / "b.csv", ["d", "r"], [(2, 0.5)])
    assert (tmp_path / "b.csv").read_text() == "d,r\n2,0.5\n"
    with pytest.raises(ValueError):
        write_csv(tmp_path / "c.csv", ["a", "b"], [[1, 2], [1]])


def test_field_round_trip(tmp_path, rng):
    x = rng.normal(size=50)
    y = rng.normal(size=50)
    psi = rng.normal(size=50) + 1j * rng.normal(size=50)
    write_field(tmp_path / "f.bin", [x, y], psi)
    coords, back = read_field(tmp_path / "f.bin")
    assert len(coords) == 2 and np.array_equal(coords[1], y)
    assert np.array_equal(back, psi)
    assert (tmp_path / "f.bin").stat().st_size == 8 + 50 * 4 * 8


def test_text_hash():
    assert text_hash("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
