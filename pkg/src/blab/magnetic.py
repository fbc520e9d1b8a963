"""Magnetic billiards: Larmor arcs, collisions, centers and offset polynomials."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .algebra.polynomial import BivariatePolynomial, Polynomial, parse_polynomial
from .birkhoff import BoundaryCollision, reflect
from .curves import ConvexCurve, offset_point, validate_weak_field
from .errors import NoIntersection, NoOffsetModel, TangentCircle, WeakFieldViolation

CCW, CW = "ccw", "cw"
EXIT_CELLS = 2048
ROOT_TOL = 1e-10
ORIENTATION_TOL = 1e-10


def rot90(v):
    return np.array([-v[1], v[0]])


def larmor_center(position, velocity, r: float, orientation: str = CCW) -> np.ndarray:
    """x + r J v for counterclockwise circles, x - r J v for clockwise ones."""
    sign = 1.0 if orientation == CCW else -1.0
    return np.asarray(position, dtype=float) + sign * r * rot90(np.asarray(velocity, dtype=float))


@dataclass(frozen=True)
class LarmorArcState:
    position: np.ndarray
    velocity: np.ndarray
    r: float
    orientation: str = CCW

    @property
    def center(self) -> np.ndarray:
        return larmor_center(self.position, self.velocity, self.r, self.orientation)


def require_weak_field(curve: ConvexCurve, r: float):
    res = validate_weak_field(curve, 1.0 / r)
    if not res.passed:
        raise WeakFieldViolation(
            f"Larmor radius {r} does not exceed the maximal curvature radius {1.0 / res.k_min:.6g}"
        )
    return res


def _circle_roots(curve: ConvexCurve, center, r: float):
    cx, cy = float(center[0]), float(center[1])
    phi, pts = curve.grid(EXIT_CELLS)
    g = np.hypot(pts[:, 0] - cx, pts[:, 1] - cy) - r

    def fun(t):
        x, y = curve.xy(t)
        return math.hypot(x - cx, y - cy) - r

    step = 2 * math.pi / EXIT_CELLS
    roots = []
    for i in np.nonzero(np.sign(g) != np.sign(np.roll(g, -1)))[0]:
        lo, hi = phi[i], phi[i] + step
        if g[i] == 0.0:
            roots.append(float(lo))
            continue
        roots.append(brentq(fun, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps))
    return roots, g


def larmor_exit(curve: ConvexCurve, r: float, center, orientation: str = CCW) -> BoundaryCollision:
    """Exit point of the Larmor circle about ``center`` through the boundary.

    The exit is the intersection where the traversal velocity points out of the
    domain.  The returned collision carries the reflected outgoing velocity.
    """
    roots, g = _circle_roots(curve, center, r)
    if not roots:
        raise NoIntersection(f"circle of radius {r} about {tuple(map(float, center))} misses the boundary")
    if len(roots) == 1 or (len(roots) == 2 and abs(roots[1] - roots[0]) < ROOT_TOL):
        raise TangentCircle(f"circle of radius {r} about {tuple(map(float, center))} is tangent to the boundary")
    if len(roots) > 2:
        raise NoIntersection(
            f"circle about {tuple(map(float, center))} meets the boundary {len(roots)} times; weak-field regime violated"
        )
    sign = 1.0 if orientation == CCW else -1.0
    c = np.asarray(center, dtype=float)
    out = []
    for phi in roots:
        d = curve.derivatives(phi, 1)
        z, t = d[0], d[1] / math.hypot(*d[1])
        n = rot90(t)
        v = sign * rot90(z - c) / r
        v = v / math.hypot(*v)
        out.append((float(-(v @ n)), phi, z, v, t, n))
    out.sort(key=lambda e: -e[0])
    outward, phi, z, v, t, n = out[0]
    if outward <= ORIENTATION_TOL or out[1][0] >= -ORIENTATION_TOL:
        raise TangentCircle(f"ambiguous exit for the circle about {tuple(map(float, center))} (outward {outward:.3g})")
    s = float(curve.arclength(phi)) % curve.length
    return BoundaryCollision(s, phi % (2 * math.pi), z, v, reflect(v, n), t, n)


def magnetic_step(curve: ConvexCurve, r: float, center, orientation: str = CCW):
    """Ordinary magnetic billiard: exit, reflect, continue on a circle of the same orientation.

    Returns (next center, collision).
    """
    col = larmor_exit(curve, r, center, orientation)
    return larmor_center(col.point, col.outgoing, r, orientation), col


def magnetic_orbit(curve: ConvexCurve, r: float, center, n_steps: int, orientation: str = CCW):
    require_weak_field(curve, r)
    centers = [np.asarray(center, dtype=float)]
    collisions = []
    c = centers[0]
    for _ in range(n_steps):
        c, col = magnetic_step(curve, r, c, orientation)
        centers.append(c)
        collisions.append(col)
    return np.array(centers), collisions


@dataclass(frozen=True)
class CenterAnnulus:
    """Centers of radius-r circles that meet the closed domain."""

    curve: ConvexCurve
    r: float
    _polygons: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def distance_range(self, center) -> tuple[float, float]:
        """(distance from center to the domain, max distance to the boundary)."""
        c = np.asarray(center, dtype=float)
        phi, pts = self.curve.grid(EXIT_CELLS)
        d = np.hypot(pts[:, 0] - c[0], pts[:, 1] - c[1])
        step = 2 * math.pi / EXIT_CELLS
        fun = lambda t: math.hypot(*(np.subtract(self.curve.xy(t), c)))
        ext = []
        for sign, i in ((1.0, int(np.argmin(d))), (-1.0, int(np.argmax(d)))):
            res = minimize_scalar(lambda t: sign * fun(t), bounds=(phi[i] - step, phi[i] + step),
                                  method="bounded", options={"xatol": 1e-12})
            ext.append(sign * min(float(res.fun), sign * float(d[i])))
        dmin, dmax = ext
        if self.curve.indicator(*c) < 0:
            dmin = 0.0
        return dmin, dmax

    def margin(self, center) -> float:
        """Positive inside the annulus, negative outside: min(r - dmin, dmax - r)."""
        dmin, dmax = self.distance_range(center)
        return min(self.r - dmin, dmax - self.r)

    def contains(self, center) -> bool:
        return self.margin(center) >= 0.0

    def boundary(self, side: int, n: int = 4096) -> np.ndarray:
        """Sampled offset curve: +1 for the inner boundary, -1 for the outer one."""
        key = (side, n)
        if key not in self._polygons:
            s = np.linspace(0.0, self.curve.length, n, endpoint=False)
            pts = offset_point(self.curve, s, side * self.r)
            pts.flags.writeable = False
            self._polygons[key] = pts
        return self._polygons[key]

    def contains_by_offsets(self, center, n: int = 4096) -> bool:
        """Membership via the offset polygons: outside the inner one, inside the outer one."""
        return (not _in_polygon(self.boundary(+1, n), center)) and _in_polygon(self.boundary(-1, n), center)

    def sample(self, rng, n: int, margin: float = 0.0) -> np.ndarray:
        """Random centers in the annulus at least ``margin`` from its boundary."""
        outer = self.boundary(-1, 512)
        lo, hi = outer.min(axis=0), outer.max(axis=0)
        out = []
        while len(out) < n:
            c = rng.uniform(lo, hi)
            if self.margin(c) > margin:
                out.append(c)
        return np.array(out)


def _in_polygon(poly: np.ndarray, p) -> bool:
    x, y = float(p[0]), float(p[1])
    xs, ys = poly[:, 0], poly[:, 1]
    xn, yn = np.roll(xs, -1), np.roll(ys, -1)
    crosses = (ys > y) != (yn > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = xs + (y - ys) * (xn - xs) / (yn - ys)
    return bool(np.count_nonzero(crosses & (x < xint)) % 2)


# -- offset polynomials ------------------------------------------------------------

_ELLIPSE_OFFSET_TEXT = """
a^8*(b^4+(r^2-y^2)^2-2*b^2*(r^2+y^2))
+ b^4*(r^2-x^2)^2*(b^4-2*b^2*(r^2-x^2+y^2)+(x^2+y^2-r^2)^2)
- 2*a^6*(b^6+(r^2-y^2)^2*(r^2+x^2-y^2)-b^4*(r^2-2*x^2+3*y^2)-b^2*(r^4+3*y^2*(x^2-y^2)+r^2*(3*x^2+2*y^2)))
+ 2*a^2*b^2*(-b^6*(r^2+x^2)-(-r^2+x^2+y^2)^2*(r^4-x^2*y^2-r^2*(x^2+y^2))
    +b^4*(r^4-3*x^4+3*x^2*y^2+r^2*(2*x^2+3*y^2))
    +b^2*(r^6-2*x^6+x^4*y^2-3*x^2*y^4+r^4*(-4*x^2+2*y^2)+r^2*(5*x^4-3*x^2*y^2-3*y^4)))
+ a^4*(b^8+2*b^6*(r^2+3*x^2-2*y^2)+(r^2-y^2)^2*(-r^2+x^2+y^2)^2
    -2*b^4*(3*r^4-3*x^4+5*x^2*y^2-3*y^4+4*r^2*(x^2+y^2))
    +2*b^2*(r^6-3*x^4*y^2+x^2*y^4-2*y^6+2*r^4*(x^2-2*y^2)+r^2*(-3*x^4-3*x^2*y^2+5*y^4)))
"""

# the same curve written out for semi-axes 2 and 1
_ELLIPSE_2_1_TEXT = """
9*r^8-6*r^6*(15+2*x^2+7*y^2)+(x^2+4*y^2-4)^2*(x^4+2*x^2*(y^2-3)+(3+y^2)^2)
+ r^4*(297-2*x^4+270*y^2+73*y^4+x^2*(62*y^2-90))
+ 2*r^2*(2*x^6-x^4*(31+15*y^2)+x^2*(135+70*y^2-45*y^4)-4*(45+45*y^2+31*y^4+7*y^6))
"""

_PARAMS = ("a", "b", "r", "x", "y")


@lru_cache(maxsize=None)
def _table(text: str) -> Polynomial:
    return parse_polynomial(text, _PARAMS)


def _instantiate(table: Polynomial, a, b, r) -> BivariatePolynomial:
    vals = {"a": Fraction(a), "b": Fraction(b), "r": Fraction(r)}
    return table.substitute(vals | {"x": "x", "y": "y"}, ("x", "y"))


def ellipse_offset_polynomial(a: float, b: float, r: float) -> BivariatePolynomial:
    """Degree-8 polynomial vanishing on both offsets at distance r of x^2/a^2 + y^2/b^2 = 1.

    Coefficients are exact rationals in the (binary) values of a, b, r.
    """
    if not (a > 0 and b > 0 and r > 0):
        raise ValueError("a, b and r must be positive")
    return _instantiate(_table(_ELLIPSE_OFFSET_TEXT), a, b, r)


def ellipse_2_1_offset_polynomial(r: float) -> BivariatePolynomial:
    """The semi-axes (2, 1) member of the family, from its own closed form."""
    return _instantiate(_table(_ELLIPSE_2_1_TEXT), 2, 1, r)


def circle_offset_polynomial(R: float, r: float) -> BivariatePolynomial:
    """(x^2 + y^2 - (R - r)^2)(x^2 + y^2 - (R + r)^2)."""
    R, r = Fraction(R), Fraction(r)
    q = Polynomial.parse("x^2 + y^2")
    return (q - (R - r) ** 2) * (q - (R + r) ** 2)


def offset_polynomial(curve: ConvexCurve, r: float) -> BivariatePolynomial:
    """Closed-form polynomial of both offsets, for circles and ellipses centered at the origin."""
    if curve.kind == "circle":
        return circle_offset_polynomial(curve.params[0], r)
    if curve.kind == "ellipse":
        a, b = curve.params
        if a == b:
            return circle_offset_polynomial(a, r)
        return ellipse_offset_polynomial(a, b, r)
    raise NoOffsetModel(f"no closed-form offset polynomial for {curve.spec()}")


def offset_vanishing_residual(poly: BivariatePolynomial, curve: ConvexCurve, r: float, n_samples: int = 512) -> float:
    """max over samples of |poly| / scale on both offsets (see ``scale_at``)."""
    s = np.linspace(0.0, curve.length, n_samples, endpoint=False)
    worst = 0.0
    for d in (r, -r):
        p = offset_point(curve, s, d)
        val = np.abs(poly(p[:, 0], p[:, 1]))
        scale = np.maximum(poly.scale_at(p[:, 0], p[:, 1]), 1e-300)
        worst = max(worst, float(np.max(val / scale)))
    return worst


def ellipse_offset_cusp(r: float) -> tuple[float, float]:
    """Closed-form first-quadrant cusp of the inner offset of ellipse(2, 1), for 1/2 < r < 4."""
    c = 2.0 ** (1.0 / 3.0)
    r23, r43 = r ** (2.0 / 3.0), r ** (4.0 / 3.0)
    x0 = math.sqrt(16.0 / 3.0 - 4.0 * c * c * r23 + 2.0 * c * r43 - r * r / 3.0)
    y0 = math.sqrt(c * c * r23 - 1.0 / 3.0 - 2.0 * c * r43 + 4.0 * r * r / 3.0)
    return x0, y0
