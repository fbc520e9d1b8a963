"""Polar duality, the angular billiard and its conserved rational integrals.

Pole-centered coordinates are used internally: a point P is stored as
P - O, and a line is stored by the (u, v) with u X + v Y = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .algebra.polynomial import SIGMA_V, XY, BivariatePolynomial, Polynomial
from .birkhoff import BoundaryCollision, launch_from, reflect_step
from .curves import ConvexCurve, dual_curve
from .errors import AtPole, InsideCurve, MuSingular, NotHomogeneous, OnExclusionSet, ThroughPole

TANGENCY_CELLS = 1024
PARALLEL_TOL = 1e-10
POLE_TOL = 1e-14


@dataclass(frozen=True)
class DualityFrame:
    pole: tuple = (0.0, 0.0)

    @property
    def origin(self) -> np.ndarray:
        return np.asarray(self.pole, dtype=float)

    def local(self, p) -> np.ndarray:
        return np.asarray(p, dtype=float) - self.origin

    def world(self, p) -> np.ndarray:
        return np.asarray(p, dtype=float) + self.origin


@dataclass(frozen=True)
class LineRecord:
    """The line u X + v Y = 1 in pole-centered coordinates."""

    u: float
    v: float

    def __post_init__(self):
        if self.u == 0.0 and self.v == 0.0:
            raise ThroughPole("(u, v) = (0, 0) does not describe a line")

    @classmethod
    def through(cls, frame: DualityFrame, point, direction) -> "LineRecord":
        """The line through ``point`` (world coordinates) with the given direction."""
        p = frame.local(point)
        d = np.asarray(direction, dtype=float)
        n = np.array([-d[1], d[0]])
        c = float(n @ p)
        if abs(c) <= POLE_TOL * max(1.0, float(np.hypot(*p))) * float(np.hypot(*n)):
            raise ThroughPole(f"line through {tuple(map(float, point))} passes through the pole {frame.pole}")
        return cls(float(n[0] / c), float(n[1] / c))

    @property
    def normal(self) -> np.ndarray:
        return np.array([self.u, self.v])

    def contains(self, frame: DualityFrame, point, tol=1e-12) -> bool:
        p = frame.local(point)
        return abs(self.u * p[0] + self.v * p[1] - 1.0) <= tol


def dualize(frame: DualityFrame, obj):
    """Point (world coordinates) <-> :class:`LineRecord`; the map is an involution."""
    if isinstance(obj, LineRecord):
        return frame.world(obj.normal)
    p = frame.local(obj)
    if float(np.hypot(*p)) <= POLE_TOL:
        raise AtPole(f"point {tuple(map(float, obj))} coincides with the pole")
    return LineRecord(float(p[0]), float(p[1]))


def tangency_parameters(Gamma: ConvexCurve, A, cells: int = TANGENCY_CELLS):
    """Parameters of the points T on Gamma whose tangent line passes through A."""
    A = np.asarray(A, dtype=float)

    def h(phi):
        d = Gamma.derivatives(phi, 1)
        return (d[0][..., 0] - A[0]) * d[1][..., 1] - (d[0][..., 1] - A[1]) * d[1][..., 0]

    grid = np.linspace(0.0, 2 * math.pi, cells + 1)
    vals = h(grid)
    roots = []
    for i in range(cells):
        if vals[i] == 0.0:
            roots.append(float(grid[i]))
        elif vals[i] * vals[i + 1] < 0:
            roots.append(brentq(lambda t: float(h(t)), grid[i], grid[i + 1], xtol=1e-15, rtol=1e-15))
    return roots


def right_tangency(Gamma: ConvexCurve, frame: DualityFrame, A):
    """Tangency point T with (T - A) x (O - A) > 0 and its parameter."""
    A = np.asarray(A, dtype=float)
    if Gamma.indicator(*A) <= 0.0:
        raise InsideCurve(f"point {tuple(A)} is not exterior to {Gamma.spec()}")
    O = frame.origin
    for phi in tangency_parameters(Gamma, A):
        T = Gamma.point_at(phi)
        w = T - A
        z = O - A
        if w[0] * z[1] - w[1] * z[0] > 0:
            return T, phi
    raise InsideCurve(f"no right tangent from {tuple(A)} to {Gamma.spec()}")


def angular_reflect(frame: DualityFrame, A, T):
    """Intersect line AT with the mirror image of ray OA across line OT."""
    O = frame.origin
    a = np.asarray(A, dtype=float) - O
    t = np.asarray(T, dtype=float) - O
    e = t / math.hypot(*t)
    ray = 2.0 * float(a @ e) * e - a
    d = t - a
    # O + lam * ray = A + mu * d
    det = d[0] * ray[1] - d[1] * ray[0]
    if abs(det) <= PARALLEL_TOL * math.hypot(*d) * math.hypot(*ray):
        raise OnExclusionSet(f"reflected ray is parallel to the tangent line from {tuple(A)}")
    lam = (d[0] * a[1] - d[1] * a[0]) / det
    return O + lam * ray


def angular_step(Gamma: ConvexCurve, frame: DualityFrame, A) -> np.ndarray:
    """One step A -> B of the angular billiard outside Gamma."""
    T, _ = right_tangency(Gamma, frame, A)
    return angular_reflect(frame, A, T)


def angular_orbit(Gamma: ConvexCurve, frame: DualityFrame, A, n_steps: int) -> np.ndarray:
    pts = [np.asarray(A, dtype=float)]
    for _ in range(n_steps):
        pts.append(angular_step(Gamma, frame, pts[-1]))
    return np.array(pts)


def duality_equivalence_residual(gamma: ConvexCurve, frame: DualityFrame, collision: BoundaryCollision,
                                 Gamma: ConvexCurve | None = None) -> float:
    """|A(dual(incoming line)) - dual(outgoing line)| for one billiard collision.

    Duality forgets the direction of a chord.  The right-tangent rule reflects
    at the endpoint reached when the chord is traversed with the pole on its
    left; if the pole is on the right of the incoming motion, the matching
    Birkhoff reflection is the one at the chord's other endpoint.
    """
    Gamma = Gamma if Gamma is not None else dual_curve(gamma, frame.pole)
    if not pole_on_left(frame, collision):
        back = launch_from(gamma, collision.s, -collision.incoming)
        collision = reflect_step(gamma, back)
    a = LineRecord.through(frame, collision.point, collision.incoming)
    b = LineRecord.through(frame, collision.point, collision.outgoing)
    A = dualize(frame, a)
    B = dualize(frame, b)
    return float(np.hypot(*(angular_step(Gamma, frame, A) - B)))


def pole_on_left(frame: DualityFrame, collision: BoundaryCollision) -> bool:
    v = collision.incoming
    z = frame.origin - collision.point
    return float(v[0] * z[1] - v[1] * z[0]) > 0.0


# -- integrals ----------------------------------------------------------------


@dataclass(frozen=True)
class AngularIntegralModel:
    """G = F / (X^2 + Y^2)^p in pole-centered coordinates."""

    F: BivariatePolynomial
    p: int
    pole: tuple = (0.0, 0.0)
    trivial: bool = False

    def G(self, x, y):
        X = np.asarray(x, dtype=float) - self.pole[0]
        Y = np.asarray(y, dtype=float) - self.pole[1]
        return self.F(X, Y) / (X * X + Y * Y) ** self.p


def transport_integral(Phi: Polynomial, p: int | None = None, pole=(0.0, 0.0)) -> AngularIntegralModel:
    """F(x, y) = Phi(1, y, -x) for Phi homogeneous of degree 2p in (sigma, v1, v2)."""
    if Phi.variables != SIGMA_V:
        Phi = Polynomial(Phi.terms, SIGMA_V) if len(Phi.variables) == 3 else Phi
    d = Phi.homogeneous_degree()
    if d is None:
        raise NotHomogeneous(f"{Phi} is not homogeneous in {SIGMA_V}")
    if d % 2:
        raise NotHomogeneous(f"degree {d} is odd; the integral must have even degree 2p")
    if p is None:
        p = d // 2
    if 2 * p != d:
        raise NotHomogeneous(f"degree {d} does not equal 2p = {2 * p}")
    x = Polynomial.variable("x", XY)
    y = Polynomial.variable("y", XY)
    F = Phi.substitute({"sigma": 1, "v1": y, "v2": -x}, XY)
    return AngularIntegralModel(F, p, tuple(pole), is_power_of_radius(F, p))


def is_power_of_radius(F: Polynomial, p: int) -> bool:
    """True when F = c (x^2 + y^2)^p, i.e. G is constant."""
    base = Polynomial.parse("x^2 + y^2") ** p
    lead = F.coefficient(2 * p, 0)
    if lead == 0:
        return F.is_zero()
    diff = F - base * lead
    scale = max(abs(float(c)) for c in F.terms.values())
    return all(abs(float(c)) <= 1e-12 * scale for c in diff.terms.values())


def shift_equation_sides(Ft: BivariatePolynomial, m: int, point, eps: float):
    """Both sides of the functional equation linking F~ at the eps and mu shifted points."""
    x, y = float(point[0]), float(point[1])
    j = Ft.jet(x, y)
    fx, fy = float(j.fx), float(j.fy)
    r2 = x * x + y * y
    denom = r2 + 2.0 * eps * (x * fy - y * fx)
    if abs(denom) <= 1e-6:
        raise MuSingular(f"mu denominator {denom:.3g} vanishes at {point}, eps={eps}")
    if eps == 0.0:
        v = Ft(x, y)
        return v, v, denom
    mu = -r2 * eps / denom
    lhs = (-mu / eps) ** (2 * m) * Ft(x + eps * fy, y - eps * fx)
    rhs = Ft(x + mu * fy, y - mu * fx)
    return float(lhs), float(rhs), denom


def shift_equation_residual(Ft: BivariatePolynomial, m: int, point, eps: float, on_curve_tol: float = 1e-9) -> float:
    """Relative gap between the two sides (point in pole-centered coordinates)."""
    x, y = float(point[0]), float(point[1])
    if abs(Ft(x, y)) >= on_curve_tol * max(1.0, Ft.max_term(x, y)):
        raise ValueError(f"{point} is not on the curve F~ = 0")
    lhs, rhs, _ = shift_equation_sides(Ft, m, point, eps)
    big = max(abs(lhs), abs(rhs))
    return 0.0 if big == 0.0 else abs(lhs - rhs) / big


def hessian_power_values(f: BivariatePolynomial, g: BivariatePolynomial, m: int, points) -> np.ndarray:
    """q = g^3 H(f) / (x^2 + y^2)^(3m - 3) at each sample (pole-centered)."""
    pts = np.asarray(points, dtype=float)
    x, y = pts[:, 0], pts[:, 1]
    H = f.jet(x, y).affine_hessian
    gv = g(x, y) if isinstance(g, Polynomial) else np.full(x.shape, float(g))
    return gv**3 * H / (x * x + y * y) ** (3 * m - 3)


def hessian_power_residual(f, g, m: int, points) -> tuple[float, float]:
    """(mean of q, (max - min) / |mean|)."""
    q = hessian_power_values(f, g, m, points)
    mean = float(np.mean(q))
    spread = float((q.max() - q.min()) / abs(mean)) if mean != 0 else math.inf
    return mean, spread


def radial_samples(f: BivariatePolynomial, n: int = 256, r_max: float = 100.0, center=(0.0, 0.0)) -> np.ndarray:
    """Points of {f = 0} on n rays from ``center``, assuming the curve is star-shaped about it."""
    cx, cy = center
    out = []
    for th in np.linspace(0.0, 2 * math.pi, n, endpoint=False):
        c, s = math.cos(th), math.sin(th)
        g = lambda t: f(cx + t * c, cy + t * s)
        ts = np.geomspace(1e-6, r_max, 400)
        vals = g(ts)
        idx = np.nonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))[0]
        if idx.size == 0:
            continue
        i = idx[0]
        t = brentq(g, ts[i], ts[i + 1], xtol=1e-16, rtol=1e-15)
        out.append((cx + t * c, cy + t * s))
    return np.array(out)


def ellipse_angular_integral(a: float, b: float, pole=(0.0, 0.0)) -> AngularIntegralModel:
    """G = (b^2 x^2 + a^2 y^2 - a^2 b^2) / |X - O|^2 for the ellipse with semi-axes a, b."""
    x0, y0 = pole
    # numerator in world coordinates, re-expressed about the pole
    X = Polynomial.parse("x") + x0
    Y = Polynomial.parse("y") + y0
    F = b * b * X**2 + a * a * Y**2 - a * a * b * b
    return AngularIntegralModel(F, 1, (float(x0), float(y0)))
