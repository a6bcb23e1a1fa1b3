import json
import struct

import numpy as np
import pytest

from moyal_scatter.dynamics import SpacetimeField
from moyal_scatter.io import MAGIC, read_array, read_field, read_operator, sidecar_path, write_array, write_field, write_operator
from moyal_scatter.lattice import OneParticleOperator, SpatialGrid


def test_header_layout(tmp_path, rng):
    a = rng.standard_normal((3, 5)) + 1j * rng.standard_normal((3, 5))
    path = write_array(tmp_path / "a.bin", a, label="test")
    raw = path.read_bytes()
    assert raw[:8] == MAGIC
    assert struct.unpack_from("<I2Q", raw, 8) == (2, 3, 5)
    payload = np.frombuffer(raw[28:], dtype="<f8")
    np.testing.assert_array_equal(payload[0::2], a.real.ravel())
    np.testing.assert_array_equal(payload[1::2], a.imag.ravel())
    meta = json.loads(sidecar_path(path).read_text())
    assert meta["shape"] == [3, 5] and meta["header_bytes"] == 28 and meta["label"] == "test"


def test_operator_round_trip(tmp_path, rng):
    op = OneParticleOperator(rng.standard_normal((4, 4)) + 0j, label="T_sc")
    back = read_operator(write_operator(tmp_path / "op.bin", op))
    np.testing.assert_array_equal(back.matrix, op.matrix)
    assert back.label == "T_sc" and back.basis == op.basis


def test_field_round_trip(tmp_path, rng):
    grid = SpatialGrid(6.0, 8, 1)
    times = np.linspace(-1.0, 1.0, 11)
    data = rng.standard_normal((11, 2 * grid.n_modes)) + 1j * rng.standard_normal((11, 2 * grid.n_modes))
    f = SpacetimeField(times, data, grid, 2, "f")
    path = write_field(tmp_path / "f.bin", f)
    back = read_field(path, grid, 2)
    np.testing.assert_array_equal(back.data, data)
    np.testing.assert_array_equal(back.times, times)
    ax = json.loads(sidecar_path(path).read_text())["time_axis"]
    assert ax["count"] == 11 and ax["dt"] == pytest.approx(0.2)


def test_writes_are_deterministic(tmp_path):
    a = np.arange(6, dtype=complex).reshape(2, 3)
    p1, p2 = write_array(tmp_path / "x.bin", a), write_array(tmp_path / "y.bin", a)
    assert p1.read_bytes() == p2.read_bytes()
    assert sidecar_path(p1).read_bytes() == sidecar_path(p2).read_bytes()


def test_corrupt_files_rejected(tmp_path):
    path = write_array(tmp_path / "a.bin", np.ones((2, 2), complex))
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(ValueError, match="payload"):
        read_array(path)
    path.write_bytes(b"garbage!" + bytes(40))
    with pytest.raises(ValueError, match="not a moyal-scatter"):
        read_array(path)
