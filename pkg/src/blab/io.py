"""Trace CSV writers and readers; floats are written with 17 significant digits."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

BIRKHOFF_COLUMNS = ("step", "s", "x", "y", "vx", "vy", "eps", "F")
MAGNETIC_COLUMNS = ("step", "s", "x", "y", "vx", "vy", "cx", "cy", "eps")
TWOSIDED_COLUMNS = ("step", "side", "cx", "cy", "z_s", "eps", "F")
ANGULAR_COLUMNS = ("step", "x", "y", "G")

COLUMNS = {
    "birkhoff": BIRKHOFF_COLUMNS,
    "magnetic": MAGNETIC_COLUMNS,
    "twosided": TWOSIDED_COLUMNS,
    "angular": ANGULAR_COLUMNS,
}


def fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def write_rows(path, columns, rows):
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(columns)
            for row in rows:
                w.writerow([fmt(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write trace {path}: {exc.strerror}") from exc
    return path


def birkhoff_rows(trace, integral=None):
    F = trace.integral_values(integral) if integral is not None else [math.nan] * len(trace)
    for k, (c, f) in enumerate(zip(trace.collisions, F)):
        yield (k, c.s, c.point[0], c.point[1], c.outgoing[0], c.outgoing[1], c.eps, f)


def magnetic_rows(centers, collisions):
    """Row k: collision k, the reflected velocity and the center of the next Larmor circle."""
    for k, (col, c) in enumerate(zip(collisions, centers[1:]), start=1):
        yield (k, col.s, col.point[0], col.point[1], col.outgoing[0], col.outgoing[1], c[0], c[1], col.eps)


def twosided_rows(c0, collisions, F=None):
    """Row 0 is the initial center (no collision yet); row k is the center after k collisions."""
    val = (lambda p: float(F(*p))) if F is not None else (lambda p: math.nan)
    yield (0, c0.side, c0.point[0], c0.point[1], math.nan, math.nan, val(c0.point))
    for k, col in enumerate(collisions, start=1):
        c = col.after
        yield (k, c.side, c.point[0], c.point[1], col.s, col.eps, val(c.point))


def angular_rows(points, model=None):
    G = model.G(points[:, 0], points[:, 1]) if model is not None else np.full(len(points), math.nan)
    for k, (p, g) in enumerate(zip(points, G)):
        yield (k, p[0], p[1], g)


def read_trace(path) -> dict[str, np.ndarray]:
    """Column name -> float array (integer columns are returned as floats)."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array([[float(v) for v in r] for r in body]) if body else np.empty((0, len(header)))
    return {name: data[:, i] for i, name in enumerate(header)}
