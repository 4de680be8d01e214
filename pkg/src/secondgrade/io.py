"""On-disk formats: field snapshots, time-series CSV and identity reports."""

from __future__ import annotations

import csv
import json
import math
import struct
from pathlib import Path

import numpy as np

from .spectral import Grid3

SNAPSHOT_MAGIC = b"SGF3"
_HEADER = struct.Struct("<4sIdd")

SERIES_COLUMNS = (["t", "tau", "b1", "b2", "b3"] + [f"E{i}" for i in range(7)]
                  + ["err_L1", "err_L2", "err_Linf", "err_vel_L2"])


def write_snapshot(path, w: np.ndarray, grid: Grid3, t: float):
    """Magic "SGF3", u32 n, f64 L, f64 t, then w1, w2, w3 as little-endian f64,
    each n^3 values with the x-index varying fastest."""
    w = np.asarray(w, dtype=float)
    if w.shape != (3,) + grid.shape:
        raise ValueError(f"snapshot field must have shape {(3,) + grid.shape}")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(SNAPSHOT_MAGIC, grid.n, grid.box_length, float(t)))
        for c in range(3):
            fh.write(np.asarray(w[c].ravel(order="F"), dtype="<f8").tobytes())


def read_snapshot(path) -> tuple[np.ndarray, Grid3, float]:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError("snapshot file is truncated")
    magic, n, L, t = _HEADER.unpack_from(data)
    if magic != SNAPSHOT_MAGIC:
        raise ValueError(f"bad snapshot magic {magic!r}")
    grid = Grid3(int(n), float(L))
    count = n**3
    if len(data) != _HEADER.size + 3 * count * 8:
        raise ValueError("snapshot payload size does not match its header")
    flat = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    w = np.stack([flat[c * count:(c + 1) * count].reshape((n, n, n), order="F") for c in range(3)])
    return w.astype(float), grid, float(t)


def _fmt(x) -> str:
    return repr(float(x))


def write_series_csv(path, rows: list[dict]):
    """One row per sample; missing entries are written as nan."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SERIES_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row.get(c, math.nan)) for c in SERIES_COLUMNS])


def read_series_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        cols = [[] for _ in header]
        for line in reader:
            for i, v in enumerate(line):
                cols[i].append(float(v))
    return {h: np.array(c) for h, c in zip(header, cols)}


def write_reports_jsonl(path, reports):
    """One JSON object per line with name, lhs, rhs, rel_err, tol, status (+ extras)."""
    with open(path, "w") as fh:
        for r in reports:
            rec = r.record() if hasattr(r, "record") else dict(r)
            fh.write(json.dumps(rec, allow_nan=True) + "\n")


def read_reports_jsonl(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]
