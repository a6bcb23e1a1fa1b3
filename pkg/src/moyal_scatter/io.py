"""Flat binary snapshots of operators and spacetime fields.

Record layout (all integers little-endian)::

    offset  size        content
    0       8           magic b"MSCOP\\x00\\x00\\x01"
    8       4           uint32 ndim
    12      8 * ndim    uint64 dims, slowest axis first
    ...                 complex128 payload, little-endian, (re, im)
                        interleaved, row-major

A JSON sidecar ``<file>.json`` records shape, dtype, basis and label.
Spacetime fields add a ``time_axis`` entry with ``t0``, ``dt``, ``count`` and
the exact sample times.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"MSCOP\x00\x00\x01"
DTYPE = np.dtype("<c16")


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def write_array(path, array: np.ndarray, *, basis: str = "momentum-spinor", label: str = "", extra: dict | None = None) -> Path:
    path = Path(path)
    data = np.ascontiguousarray(array, dtype=DTYPE)
    header = MAGIC + struct.pack("<I", data.ndim) + struct.pack(f"<{data.ndim}Q", *data.shape)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes(order="C"))
    meta = {
        "format": "moyal-scatter-binary",
        "version": 1,
        "shape": list(data.shape),
        "dtype": "complex128",
        "byte_order": "little",
        "layout": "row-major, interleaved re/im",
        "header_bytes": len(header),
        "basis": basis,
        "label": label,
    }
    if extra:
        meta.update(extra)
    sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path


def read_array(path) -> tuple[np.ndarray, dict]:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:8] != MAGIC:
        raise ValueError(f"{path}: not a moyal-scatter binary record")
    (ndim,) = struct.unpack_from("<I", raw, 8)
    dims = struct.unpack_from(f"<{ndim}Q", raw, 12)
    offset = 12 + 8 * ndim
    count = int(np.prod(dims)) if ndim else 1
    expected = offset + count * DTYPE.itemsize
    if len(raw) != expected:
        raise ValueError(f"{path}: payload size {len(raw) - offset} does not match dims {dims}")
    data = np.frombuffer(raw, dtype=DTYPE, count=count, offset=offset).reshape(dims).copy()
    meta = json.loads(sidecar_path(path).read_text())
    return data, meta


def write_operator(path, op) -> Path:
    return write_array(path, op.matrix, basis=op.basis, label=op.label)


def read_operator(path):
    from .lattice import OneParticleOperator

    data, meta = read_array(path)
    return OneParticleOperator(data, label=meta.get("label", ""), basis=meta.get("basis", "momentum-spinor"))


def write_field(path, field) -> Path:
    time_axis = {
        "t0": float(field.times[0]),
        "dt": float(field.dt),
        "count": int(len(field.times)),
        "times": [float(t) for t in field.times],
    }
    return write_array(path, field.data, basis="time x momentum-spinor", label=field.label, extra={"time_axis": time_axis})


def read_field(path, grid, N):
    from .dynamics import SpacetimeField

    data, meta = read_array(path)
    ax = meta["time_axis"]
    times = np.asarray(ax["times"], dtype=float)
    return SpacetimeField(times=times, data=data, grid=grid, N=N, label=meta.get("label", ""))
