"""Plain-text and binary writers. Every CSV is comma separated with LF endings."""
from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np


def _fmt(x):
    # repr of a python float is the shortest string that round-trips
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path, header, columns):
    cols = [np.asarray(c).ravel() for c in columns]
    n = len(cols[0]) if cols else 0
    if any(len(c) != n for c in cols):
        raise ValueError("columns must have equal length")
    rows = [",".join(header)]
    for i in range(n):
        rows.append(",".join(_fmt(c[i]) for c in cols))
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(rows) + "\n")


def write_rows(path, header, rows):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(_fmt(v) for v in r) + "\n")


def read_csv(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return {h: data[:, i] for i, h in enumerate(header)}


def write_field(path, coords, psi):
    """Binary column file: float64 little endian, columns x..., re(psi), im(psi).

    The first 8 bytes hold the number of columns as int64.
    """
    psi = np.asarray(psi).ravel()
    cols = [np.asarray(c, float).ravel() for c in coords] + [psi.real, psi.imag]
    arr = np.column_stack(cols).astype("<f8")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(np.int64(arr.shape[1]).astype("<i8").tobytes())
        fh.write(arr.tobytes())


def read_field(path):
    raw = open(path, "rb").read()
    ncol = int(np.frombuffer(raw[:8], "<i8")[0])
    arr = np.frombuffer(raw[8:], "<f8").reshape(-1, ncol)
    return [arr[:, i] for i in range(ncol - 2)], arr[:, -2] + 1j * arr[:, -1]


def text_hash(text):
    return hashlib.sha256(text.encode()).hexdigest()
