"""Classical billiard in a convex oval: chords, reflections, integrals."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .algebra.polynomial import PHASE, Polynomial
from .curves import ConvexCurve
from .errors import NumericalError, TangentialStart

TANGENTIAL_TOL = 1e-10
RAY_TOL = 1e-14


@dataclass(frozen=True)
class PhaseState:
    position: np.ndarray
    velocity: np.ndarray

    @property
    def sigma(self) -> float:
        """Angular momentum x v2 - y v1."""
        (x, y), (v1, v2) = self.position, self.velocity
        return float(x * v2 - y * v1)

    def as_tuple(self):
        return (*map(float, self.position), *map(float, self.velocity))


@dataclass(frozen=True)
class BoundaryCollision:
    s: float
    phi: float
    point: np.ndarray
    incoming: np.ndarray
    outgoing: np.ndarray
    tangent: np.ndarray
    normal: np.ndarray

    @property
    def cos_eps(self) -> float:
        return float(self.outgoing @ self.tangent)

    @property
    def eps(self) -> float:
        """Angle in (0, pi) between the outgoing velocity and the tangent."""
        return math.atan2(float(self.outgoing @ self.normal), float(self.outgoing @ self.tangent))

    @property
    def state(self) -> PhaseState:
        return PhaseState(self.point, self.outgoing)


@dataclass
class OrbitTrace:
    curve: ConvexCurve
    collisions: list = field(default_factory=list)

    def __len__(self):
        return len(self.collisions)

    def phase_arrays(self):
        """(x, y, v1, v2) arrays of the outgoing states."""
        p = np.array([c.point for c in self.collisions])
        v = np.array([c.outgoing for c in self.collisions])
        return p[:, 0], p[:, 1], v[:, 0], v[:, 1]

    def integral_values(self, integral: Polynomial) -> np.ndarray:
        return np.asarray(integral(*self.phase_arrays()), dtype=float)


def reflect(v, n):
    """Mirror law v - 2 <n, v> n for a unit normal n."""
    w = v - 2.0 * float(v @ n) * n
    return w / math.hypot(w[0], w[1])


def _frame(curve: ConvexCurve, phi: float):
    d = curve.derivatives(phi, 1)
    p, t = d[0], d[1]
    t = t / math.hypot(t[0], t[1])
    return p, t, np.array([-t[1], t[0]])


def collision_at(curve: ConvexCurve, phi: float, incoming, outgoing=None) -> BoundaryCollision:
    p, t, n = _frame(curve, phi)
    incoming = np.asarray(incoming, dtype=float)
    out = reflect(incoming, n) if outgoing is None else np.asarray(outgoing, dtype=float)
    s = float(curve.arclength(phi)) % curve.length
    return BoundaryCollision(s, phi % (2 * math.pi), p, incoming, out, t, n)


def launch(curve: ConvexCurve, s: float, eps: float) -> BoundaryCollision:
    """Collision record at arc length ``s`` leaving at angle ``eps`` from the tangent."""
    phi = float(curve.param(s))
    p, t, n = _frame(curve, phi)
    out = math.cos(eps) * t + math.sin(eps) * n
    return BoundaryCollision(float(s) % curve.length, phi % (2 * math.pi), p, reflect(out, n), out, t, n)


def launch_from(curve: ConvexCurve, s: float, direction) -> BoundaryCollision:
    phi = float(curve.param(s))
    p, t, n = _frame(curve, phi)
    out = np.asarray(direction, dtype=float)
    out = out / math.hypot(out[0], out[1])
    return BoundaryCollision(float(s) % curve.length, phi % (2 * math.pi), p, reflect(out, n), out, t, n)


def chord_exit(curve: ConvexCurve, point, direction) -> float:
    """Ray parameter where the chord from a boundary point leaves the domain.

    Brackets the sign change of the inside indicator with steps of L/64
    (halving first if the chord is shorter), then refines with Brent's method.
    """
    px, py = float(point[0]), float(point[1])
    dx, dy = float(direction[0]), float(direction[1])
    ind = lambda t: curve.indicator(px + t * dx, py + t * dy)
    h = curve.length / 64.0
    lo = h
    while ind(lo) >= 0.0:
        lo *= 0.5
        if lo < 1e-15 * curve.length:
            raise NumericalError("chord too short to resolve: direction is nearly tangent")
    hi = lo + h
    while ind(hi) < 0.0:
        lo, hi = hi, hi + h
    return brentq(ind, lo, hi, xtol=RAY_TOL * curve.length, rtol=4 * np.finfo(float).eps)


def reflect_step(curve: ConvexCurve, s_or_collision, direction=None) -> BoundaryCollision:
    """Follow the chord from a boundary point and reflect at the next hit.

    Accepts either (s, direction) or a previous :class:`BoundaryCollision`.
    """
    if isinstance(s_or_collision, BoundaryCollision):
        start = s_or_collision
        point, direction, normal = start.point, start.outgoing, start.normal
    else:
        phi = float(curve.param(s_or_collision))
        point, _, normal = _frame(curve, phi)
        direction = np.asarray(direction, dtype=float)
        direction = direction / math.hypot(direction[0], direction[1])
    if float(direction @ normal) <= TANGENTIAL_TOL:
        raise TangentialStart(
            f"direction {tuple(map(float, direction))} does not enter the domain (normal component "
            f"{float(direction @ normal):.3g})"
        )
    t = chord_exit(curve, point, direction)
    hit = point + t * direction
    phi = curve.param_of_point(float(hit[0]), float(hit[1]))
    return collision_at(curve, phi, direction)


def orbit(curve: ConvexCurve, initial: BoundaryCollision, n_steps: int) -> OrbitTrace:
    """Iterate :func:`reflect_step`; the trace starts with ``initial``."""
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    trace = OrbitTrace(curve, [initial])
    c = initial
    for k in range(1, n_steps + 1):
        try:
            c = reflect_step(curve, c)
        except TangentialStart as exc:
            raise TangentialStart(f"step {k}: {exc}", step=k) from None
        trace.collisions.append(c)
    return trace


def reverse(c: BoundaryCollision) -> BoundaryCollision:
    """The same boundary point with the incoming velocity reversed."""
    return BoundaryCollision(c.s, c.phi, c.point, -c.outgoing, -c.incoming, c.tangent, c.normal)


def integral_deviation(trace: OrbitTrace, integral: Polynomial) -> float:
    """max |F_i - F_0| / max(1, |F_0|) over the outgoing states of the trace."""
    if not len(trace):
        raise ValueError("empty trace")
    if integral.variables != PHASE:
        raise ValueError(f"integral must be a polynomial in {PHASE}")
    F = trace.integral_values(integral)
    return float(np.max(np.abs(F - F[0])) / max(1.0, abs(F[0])))


def billiard_map(curve: ConvexCurve, s: float, cos_eps: float) -> tuple[float, float]:
    """The area-preserving map (s, cos eps) -> (s', cos eps')."""
    c = launch(curve, s, math.acos(max(-1.0, min(1.0, cos_eps))))
    nxt = reflect_step(curve, c)
    return nxt.s, nxt.cos_eps


def circle_integral() -> Polynomial:
    """Angular momentum y v1 - x v2, conserved in any disk about the origin."""
    return Polynomial.parse("y*v1 - x*v2", PHASE)


def ellipse_integral(a: float, b: float) -> Polynomial:
    """b^2 v1^2 + a^2 v2^2 - (x v2 - y v1)^2 for the ellipse with semi-axes a, b."""
    v1 = Polynomial.variable("v1", PHASE)
    v2 = Polynomial.variable("v2", PHASE)
    x = Polynomial.variable("x", PHASE)
    y = Polynomial.variable("y", PHASE)
    return b * b * v1**2 + a * a * v2**2 - (x * v2 - y * v1) ** 2
