"""Real singular points of affine plane curves {f = 0}."""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy import ndimage

from ..errors import ConfigError
from .polynomial import BivariatePolynomial

GRID = 200
GN_ITERATIONS = 50
GN_TOL = 1e-12
VERIFY_TOL = 1e-9
MERGE_TOL = 1e-8
MP_DPS = 60


@dataclass(frozen=True)
class Box:
    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def __post_init__(self):
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ConfigError(f"box must have positive area, got {self}")

    @classmethod
    def coerce(cls, region) -> "Box":
        if isinstance(region, Box):
            return region
        r = list(np.ravel(region))
        if len(r) != 4:
            raise ConfigError("box is (xmin, xmax, ymin, ymax)")
        return cls(*map(float, r))

    def contains(self, p, pad=0.0) -> bool:
        return (self.xmin - pad <= p[0] <= self.xmax + pad) and (self.ymin - pad <= p[1] <= self.ymax + pad)


def _scales(poly: BivariatePolynomial, x, y):
    ax = np.maximum(1.0, np.abs(x))
    ay = np.maximum(1.0, np.abs(y))
    sf = np.maximum(poly.scale_at(x, y), 1e-300)
    sg = np.maximum(poly.gradient_max_term(ax, ay), 1e-300)
    return sf, sg


def singular_residual(poly: BivariatePolynomial, point) -> tuple[float, float]:
    """(|f|, |grad f|) relative to the largest monomial, evaluated in mpmath."""
    with mpmath.workdps(MP_DPS):
        x, y = (mpmath.mpf(float(c)) if not isinstance(c, mpmath.mpf) else c for c in point)
        f, fx, fy, *_ = poly.mp_jet(x, y)
        sf, sg = _scales(poly, float(x), float(y))
        return float(abs(f)) / float(sf), float(mpmath.sqrt(fx**2 + fy**2)) / float(sg)


def _levenberg_marquardt(poly, x, y, sf, sg):
    """Vectorized damped Gauss-Newton on (f, f_x, f_y) = 0 from many seeds."""
    lam = np.full_like(x, 1e-3)

    def cost(j):
        return (j.value / sf) ** 2 + (j.fx / sg) ** 2 + (j.fy / sg) ** 2

    j = poly.jet(x, y)
    c = cost(j)
    for _ in range(GN_ITERATIONS):
        r = np.stack([j.value / sf, j.fx / sg, j.fy / sg], axis=-1)
        J = np.stack(
            [
                np.stack([j.fx / sf, j.fy / sf], axis=-1),
                np.stack([j.fxx / sg, j.fxy / sg], axis=-1),
                np.stack([j.fxy / sg, j.fyy / sg], axis=-1),
            ],
            axis=-2,
        )
        JT = np.swapaxes(J, -1, -2)
        A = JT @ J
        g = (JT @ r[..., None])[..., 0]
        diag = np.einsum("...ii->...i", A)
        A = A + (lam[..., None] * np.maximum(diag, 1e-30))[..., None] * np.eye(2)
        det = A[..., 0, 0] * A[..., 1, 1] - A[..., 0, 1] * A[..., 1, 0]
        det = np.where(np.abs(det) < 1e-300, 1e-300, det)
        dx = -(A[..., 1, 1] * g[..., 0] - A[..., 0, 1] * g[..., 1]) / det
        dy = -(-A[..., 1, 0] * g[..., 0] + A[..., 0, 0] * g[..., 1]) / det
        xn, yn = x + dx, y + dy
        jn = poly.jet(xn, yn)
        cn = cost(jn)
        better = cn < c
        x = np.where(better, xn, x)
        y = np.where(better, yn, y)
        c = np.where(better, cn, c)
        lam = np.where(better, lam * 0.3, lam * 10.0)
        j = poly.jet(x, y)
        if np.all((np.hypot(dx, dy) < GN_TOL * np.maximum(1, np.hypot(x, y))) | (lam > 1e12)):
            break
    return x, y, c


def refine_singular_point(poly: BivariatePolynomial, point, dps: int = MP_DPS, iterations: int = 200):
    """Polish a singular point in mpmath with Gauss-Newton.

    Near-degenerate Hessians (cusps) are handled by appending det Hess = 0 to the
    system, which turns an A2 cusp into a regular solution.
    """
    with mpmath.workdps(dps):
        x, y = mpmath.mpf(float(point[0])), mpmath.mpf(float(point[1]))
        sf, sg = (mpmath.mpf(float(v)) for v in _scales(poly, float(x), float(y)))
        p = poly.mp_partials(x, y, 3)
        z = mpmath.mpf(0)
        h_scale = abs(p.get((2, 0), z) * p.get((0, 2), z)) + p.get((1, 1), z) ** 2
        det0 = p.get((2, 0), z) * p.get((0, 2), z) - p.get((1, 1), z) ** 2
        use_det = h_scale == 0 or abs(det0) < mpmath.mpf("1e-4") * h_scale
        sh = max(h_scale, mpmath.mpf(sg) ** 2 * mpmath.mpf("1e-30"))
        tol = mpmath.mpf(10) ** (-(dps - 10))
        for _ in range(iterations):
            p = poly.mp_partials(x, y, 3)
            g = lambda k: p.get(k, z)
            rows = [
                (g((0, 0)) / sf, g((1, 0)) / sf, g((0, 1)) / sf),
                (g((1, 0)) / sg, g((2, 0)) / sg, g((1, 1)) / sg),
                (g((0, 1)) / sg, g((1, 1)) / sg, g((0, 2)) / sg),
            ]
            if use_det:
                det = g((2, 0)) * g((0, 2)) - g((1, 1)) ** 2
                ddx = g((3, 0)) * g((0, 2)) + g((2, 0)) * g((1, 2)) - 2 * g((1, 1)) * g((2, 1))
                ddy = g((2, 1)) * g((0, 2)) + g((2, 0)) * g((0, 3)) - 2 * g((1, 1)) * g((1, 2))
                rows.append((det / sh, ddx / sh, ddy / sh))
            a11 = sum(r[1] * r[1] for r in rows)
            a12 = sum(r[1] * r[2] for r in rows)
            a22 = sum(r[2] * r[2] for r in rows)
            b1 = sum(r[0] * r[1] for r in rows)
            b2 = sum(r[0] * r[2] for r in rows)
            det = a11 * a22 - a12 * a12
            if det == 0:
                break
            dx = -(a22 * b1 - a12 * b2) / det
            dy = -(a11 * b2 - a12 * b1) / det
            x, y = x + dx, y + dy
            if abs(dx) + abs(dy) < tol * max(1, abs(x) + abs(y)):
                break
        return x, y


def merge_points(points, tol):
    out = []
    for p in points:
        if all(math.hypot(p[0] - q[0], p[1] - q[1]) > tol for q in out):
            out.append(p)
    return out


def find_singular_points(poly: BivariatePolynomial, region, grid: int = GRID, *, exact: bool = False):
    """All real points in ``region`` where f = f_x = f_y = 0.

    Seeds are grid cells where the scaled |f| + |grad f| is a local minimum;
    each seed is refined in double precision, polished in mpmath and kept only
    if both residuals fall below 1e-9 relative to the largest term.
    Returns a list of (x, y) float tuples, or mpmath pairs when ``exact``.
    """
    box = Box.coerce(region)
    if poly.degree < 2:
        return []
    xs = np.linspace(box.xmin, box.xmax, grid)
    ys = np.linspace(box.ymin, box.ymax, grid)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    sf, sg = _scales(poly, X, Y)
    j = poly.jet(X, Y)
    merit = np.abs(j.value) / sf + j.gradient_norm / sg
    minima = merit == ndimage.minimum_filter(merit, size=3, mode="nearest")
    # local minima below the grid's natural resolution of the merit
    hx = (box.xmax - box.xmin) / (grid - 1)
    hy = (box.ymax - box.ymin) / (grid - 1)
    level = np.quantile(merit, 0.25)
    seeds = minima & (merit <= level)
    sx, sy = X[seeds], Y[seeds]
    if sx.size == 0:
        return []
    ssf, ssg = _scales(poly, sx, sy)
    with np.errstate(all="ignore"):
        rx, ry, cost = _levenberg_marquardt(poly, sx, sy, ssf, ssg)
    pad = 2 * max(hx, hy)
    candidates = []
    for x, y, c in zip(rx, ry, cost):
        if not (np.isfinite(x) and np.isfinite(y)) or c > 1e-8:
            continue
        if not box.contains((x, y), pad):
            continue
        candidates.append((float(x), float(y)))
    candidates = merge_points(candidates, 1e-6)
    out = []
    for c in candidates:
        mx, my = refine_singular_point(poly, c)
        fr, gr = singular_residual(poly, (mx, my))
        if fr < VERIFY_TOL and gr < VERIFY_TOL and box.contains((float(mx), float(my))):
            out.append((mx, my))
    out = merge_points(out, MERGE_TOL)
    out.sort(key=lambda p: (float(p[0]), float(p[1])))
    if exact:
        return out
    # coordinates far below double resolution of the box are exact zeros
    tiny = 1e-30 * max(1.0, abs(box.xmin), abs(box.xmax), abs(box.ymin), abs(box.ymax))
    return [tuple(0.0 if abs(float(v)) < tiny else float(v) for v in p) for p in out]
