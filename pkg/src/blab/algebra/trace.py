"""Predictor-corrector tracing of smooth real components of {f = 0}."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import SingularPoint
from .polynomial import BivariatePolynomial
from .singular import Box


@dataclass(frozen=True)
class Component:
    points: np.ndarray
    closed: bool

    @property
    def length(self) -> float:
        pts = np.vstack([self.points, self.points[:1]]) if self.closed else self.points
        return float(np.sum(np.hypot(*np.diff(pts, axis=0).T)))

    def bounds(self):
        return self.points.min(axis=0), self.points.max(axis=0)


def project_to_curve(poly: BivariatePolynomial, p, iterations: int = 20, tol: float = 1e-14):
    """Newton steps along the gradient onto {f = 0}."""
    x, y = float(p[0]), float(p[1])
    for _ in range(iterations):
        j = poly.jet(x, y)
        g2 = float(j.fx) ** 2 + float(j.fy) ** 2
        if g2 == 0.0:
            raise SingularPoint(f"zero gradient at ({x}, {y})")
        t = float(j.value) / g2
        x, y = x - t * float(j.fx), y - t * float(j.fy)
        if abs(t) * math.sqrt(g2) < tol * max(1.0, abs(x), abs(y)):
            break
    return x, y


def trace_component(poly: BivariatePolynomial, start, step: float = 1e-2, box=None, max_steps: int = 200_000):
    """Follow the component through ``start`` until it closes or leaves ``box``.

    Open arcs are followed in both directions from ``start``.
    """
    box = Box.coerce(box) if box is not None else None
    forward = _march(poly, start, step, box, max_steps)
    if forward.closed:
        return forward
    backward = _march(poly, start, -step, box, max_steps)
    pts = np.vstack([backward.points[::-1], forward.points[1:]])
    return Component(pts, False)


def _march(poly, start, step, box, max_steps):
    p0 = np.array(project_to_curve(poly, start))
    pts = [p0]
    p = p0
    left_start = False
    for _ in range(max_steps):
        j = poly.jet(*p)
        t = np.array([-float(j.fy), float(j.fx)])
        n = np.hypot(*t)
        if n == 0.0:
            raise SingularPoint(f"tracing hit a singular point near {tuple(map(float, p))}")
        q = np.array(project_to_curve(poly, p + step * t / n))
        d0 = np.hypot(*(q - p0))
        if d0 > 3 * abs(step):
            left_start = True
        if left_start and d0 < 1.5 * abs(step):
            return Component(np.array(pts), True)
        if box is not None and not box.contains(q):
            return Component(np.array(pts + [q]), False)
        pts.append(q)
        p = q
    return Component(np.array(pts), False)


def trace_components(poly: BivariatePolynomial, region, step: float = 1e-2, grid: int = 200):
    """All components crossing the grid lines of ``region`` (seeded by sign changes)."""
    box = Box.coerce(region)
    xs = np.linspace(box.xmin, box.xmax, grid)
    ys = np.linspace(box.ymin, box.ymax, grid)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    F = poly(X, Y)
    seeds = []
    for i in range(grid):
        row = F[i]
        idx = np.nonzero(row[:-1] * row[1:] < 0)[0]
        for k in idx:
            t = row[k] / (row[k] - row[k + 1])
            seeds.append((xs[i], ys[k] + t * (ys[k + 1] - ys[k])))
    components: list[Component] = []
    for s in seeds:
        covered = any(np.min(np.hypot(*(c.points - s).T)) < 2 * step for c in components)
        if covered:
            continue
        components.append(trace_component(poly, s, step, box))
    return components
