"""Flat serialization for synthetic datasets.

Binary layout: 8-byte magic "RBMMDAT1", little-endian u32 ndims, u32 dims,
then the float64 payload in row-major order.  The CSV alternative covers
one- and two-dimensional arrays with a column-name header row and 17
significant digits per value.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"RBMMDAT1"


def write_array(path, arr: np.ndarray) -> None:
    a = np.asarray(arr, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", a.ndim))
        fh.write(struct.pack(f"<{a.ndim}I", *a.shape))
        fh.write(np.ascontiguousarray(a).tobytes(order="C"))


def read_array(path) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[: len(MAGIC)] != MAGIC:
        raise ValueError(f"{path}: not a data file (bad magic)")
    off = len(MAGIC)
    if len(raw) < off + 4:
        raise ValueError(f"{path}: truncated header")
    (ndim,) = struct.unpack_from("<I", raw, off)
    off += 4
    if len(raw) < off + 4 * ndim:
        raise ValueError(f"{path}: truncated dimension list")
    shape = struct.unpack_from(f"<{ndim}I", raw, off)
    off += 4 * ndim
    count = int(np.prod(shape, dtype=np.int64)) if ndim else 1
    expected = off + 8 * count
    if len(raw) != expected:
        raise ValueError(
            f"{path}: payload is {len(raw) - off} bytes, expected {8 * count}"
        )
    flat = np.frombuffer(raw, dtype="<f8", offset=off, count=count)
    return flat.reshape(shape).copy()


def write_csv(path, arr: np.ndarray, prefix: str = "c") -> None:
    a = np.asarray(arr, dtype=float)
    if a.ndim == 1:
        a = a.reshape(-1, 1)
    if a.ndim != 2:
        raise ValueError("CSV form holds only 1- or 2-dimensional arrays")
    header = ",".join(f"{prefix}{j}" for j in range(a.shape[1]))
    lines = [header]
    for row in a:
        lines.append(",".join(f"{v:.17g}" for v in row))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv(path) -> np.ndarray:
    with open(path, "r", newline="") as fh:
        lines = [ln for ln in fh.read().split("\n") if ln]
    if not lines:
        raise ValueError(f"{path}: empty CSV")
    rows = [[float(v) for v in ln.split(",")] for ln in lines[1:]]
    if not rows:
        raise ValueError(f"{path}: CSV has a header but no rows")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ValueError(f"{path}: ragged CSV rows")
    return np.asarray(rows, dtype=float)
