"""Strictly convex closed curves with Frenet data, offsets and cusp location.

Every curve is traversed counterclockwise.  ``J`` is rotation by +90 degrees,
so ``J(tangent)`` is the inward unit normal.  Curves are parametrized
internally by an angle-like parameter ``phi`` in [0, 2*pi); the public
arc-length parameter ``s`` is mapped to ``phi`` through a cumulative length
table polished by Newton steps.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import bisect, minimize_scalar

from .errors import CurveError

TWO_PI = 2.0 * math.pi
TABLE_SIZE = 4096
CUSP_GRID = 8192
EXTREMUM_GRID = 8192

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(10)


def rot90(v):
    """Rotate 2-vectors (last axis) by +90 degrees: (x, y) -> (-y, x)."""
    v = np.asarray(v, dtype=float)
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


def cross(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def dot(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1]


def _cos_sin_derivative(phi, k):
    """k-th derivative of (cos phi, sin phi), exact sign pattern (no phase shift)."""
    c, s = np.cos(phi), np.sin(phi)
    k %= 4
    if k == 0:
        return c, s
    if k == 1:
        return -s, c
    if k == 2:
        return -c, -s
    return s, -c


@dataclass(frozen=True)
class FramePacket:
    point: np.ndarray
    tangent: np.ndarray
    inward_normal: np.ndarray
    k: np.ndarray
    rho: np.ndarray
    rho_prime: np.ndarray


@dataclass(frozen=True)
class FieldConfig:
    """Magnetic field strength ``beta`` and its Larmor radius ``r = 1/beta``."""

    beta: float

    def __post_init__(self):
        if not self.beta > 0:
            raise CurveError(f"magnetic strength must be positive, got {self.beta}")

    @property
    def larmor_radius(self) -> float:
        return 1.0 / self.beta

    @classmethod
    def from_radius(cls, r: float) -> "FieldConfig":
        if not r > 0:
            raise CurveError(f"Larmor radius must be positive, got {r}")
        return cls(1.0 / r)


class WeakFieldResult(NamedTuple):
    passed: bool
    k_min: float
    margin: float


class Cusp(NamedTuple):
    s: float
    point: np.ndarray


class CuspDegeneracyWarning(RuntimeWarning):
    pass


class ConvexCurve:
    """A closed strictly convex oval.

    Use the constructors :meth:`circle`, :meth:`ellipse`, :meth:`trig`,
    :meth:`parse` or :func:`dual_curve`; instances are immutable.
    """

    def __init__(self, kind: str, params: tuple, center=(0.0, 0.0), _base=None):
        self.kind = kind
        self.params = params
        self.center = np.asarray(center, dtype=float)
        self._base = _base
        self._build_table()
        k = self._curvature_at(self._table_phi[:-1])
        if not np.all(k > 0):
            bad = self._table_phi[:-1][np.argmin(k)]
            raise CurveError(
                f"{self.spec()} is not strictly convex: curvature {k.min():.3g} at phi={bad:.6g}"
            )

    # -- constructors -----------------------------------------------------

    @classmethod
    def circle(cls, R: float) -> "ConvexCurve":
        R = float(R)
        if not R > 0:
            raise CurveError(f"circle radius must be positive, got {R}")
        return cls("circle", (R,))

    @classmethod
    def ellipse(cls, a: float, b: float) -> "ConvexCurve":
        """Ellipse x^2/a^2 + y^2/b^2 = 1 with semi-axis ``a`` along x."""
        a, b = float(a), float(b)
        if not (a > 0 and b > 0):
            raise CurveError(f"ellipse semi-axes must be positive, got {a}, {b}")
        return cls("ellipse", (a, b))

    @classmethod
    def trig(cls, c0: float, harmonics: Sequence[tuple[float, float]] = (), center=(0.0, 0.0)):
        """Radial curve r(phi) = c0 + sum_k (a_k cos k phi + b_k sin k phi) about ``center``."""
        harmonics = tuple((float(a), float(b)) for a, b in harmonics)
        c0 = float(c0)
        if not c0 > 0:
            raise CurveError(f"trig curve needs c0 > 0, got {c0}")
        return cls("trig", (c0, harmonics), center=center)

    @classmethod
    def parse(cls, text: str) -> "ConvexCurve":
        """Parse ``circle:R``, ``ellipse:a,b`` or ``trig:c0;a1,b1;...[@cx,cy]``."""
        kind, sep, rest = text.strip().partition(":")
        if not sep:
            raise CurveError(f"curve spec {text!r} lacks ':'")
        kind = kind.strip().lower()
        try:
            if kind == "circle":
                return cls.circle(float(rest))
            if kind == "ellipse":
                a, b = (float(v) for v in rest.split(","))
                return cls.ellipse(a, b)
            if kind == "trig":
                body, _, where = rest.partition("@")
                parts = [p for p in body.split(";") if p.strip()]
                c0 = float(parts[0])
                harmonics = []
                for p in parts[1:]:
                    a, b = (float(v) for v in p.split(","))
                    harmonics.append((a, b))
                center = (0.0, 0.0)
                if where:
                    center = tuple(float(v) for v in where.split(","))
                    if len(center) != 2:
                        raise ValueError("center needs two coordinates")
                return cls.trig(c0, harmonics, center=center)
        except CurveError:
            raise
        except (ValueError, IndexError) as exc:
            raise CurveError(f"malformed {kind} spec {text!r}: {exc}") from None
        raise CurveError(f"unknown curve kind {kind!r} in {text!r}")

    def spec(self) -> str:
        if self.kind == "circle":
            return f"circle:{self.params[0]!r}"
        if self.kind == "ellipse":
            return f"ellipse:{self.params[0]!r},{self.params[1]!r}"
        if self.kind == "trig":
            c0, harmonics = self.params
            body = ";".join([repr(c0)] + [f"{a!r},{b!r}" for a, b in harmonics])
            if np.any(self.center != 0):
                body += f"@{float(self.center[0])!r},{float(self.center[1])!r}"
            return "trig:" + body
        return f"dual({self._base.spec()} about {tuple(map(float, self.params[0]))})"

    def __repr__(self):
        return f"ConvexCurve({self.spec()})"

    # -- parametric derivatives --------------------------------------------

    def derivatives(self, phi, order: int = 3) -> np.ndarray:
        """Stack of d^k gamma / d phi^k for k = 0..order, shape (order+1, *phi.shape, 2)."""
        phi = np.asarray(phi, dtype=float)
        if self.kind in ("circle", "ellipse"):
            A, B = (self.params[0], self.params[0]) if self.kind == "circle" else self.params
            out = []
            for k in range(order + 1):
                c, s = _cos_sin_derivative(phi, k)
                out.append(np.stack([A * c, B * s], axis=-1))
            return np.stack(out)
        if self.kind == "trig":
            radial = self._radial_derivatives(phi, order)
            out = []
            for n in range(order + 1):
                acc = np.zeros(phi.shape + (2,))
                if n == 0:
                    acc = acc + self.center
                for i in range(n + 1):
                    c, s = _cos_sin_derivative(phi, n - i)
                    acc = acc + math.comb(n, i) * radial[i][..., None] * np.stack([c, s], axis=-1)
                out.append(acc)
            return np.stack(out)
        return self._dual_derivatives(phi, order)

    def _radial_derivatives(self, phi, order):
        c0, harmonics = self.params
        out = []
        for m in range(order + 1):
            r = np.full(phi.shape, c0 if m == 0 else 0.0)
            for k, (a, b) in enumerate(harmonics, start=1):
                ck, sk = _cos_sin_derivative(k * phi, m)
                r = r + k**m * (a * ck + b * sk)
            out.append(r)
        return out

    def radial_function(self, phi):
        """r(phi) for trig curves."""
        return self._radial_derivatives(np.asarray(phi, dtype=float), 0)[0]

    def _dual_derivatives(self, phi, order):
        # Gamma = O + N / <N, gamma - O>, with N = J gamma' any normal of the base curve.
        base, pole = self._base, self.params[0]
        g = base.derivatives(phi, order + 1)
        N = [rot90(g[i + 1]) for i in range(order + 1)]
        z = [g[0] - pole] + [g[j] for j in range(1, order + 1)]
        h = []
        for k in range(order + 1):
            h.append(sum(math.comb(k, i) * dot(N[i], z[k - i]) for i in range(k + 1)))
        w = [1.0 / h[0]]
        for k in range(1, order + 1):
            acc = sum(math.comb(k, i) * h[i] * w[k - i] for i in range(1, k + 1))
            w.append(-acc / h[0])
        out = []
        for k in range(order + 1):
            acc = sum(math.comb(k, i) * N[i] * w[k - i][..., None] for i in range(k + 1))
            if k == 0:
                acc = acc + pole
            out.append(acc)
        return np.stack(out)

    def _curvature_at(self, phi):
        d = self.derivatives(phi, 2)
        speed = np.hypot(d[1][..., 0], d[1][..., 1])
        return cross(d[1], d[2]) / speed**3

    # -- arc length -----------------------------------------------------------

    def _speed(self, phi):
        d1 = self.derivatives(phi, 1)[1]
        return np.hypot(d1[..., 0], d1[..., 1])

    def _gl_length(self, lo, hi):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        nodes = mid[..., None] + half[..., None] * _GL_NODES
        return half * (self._speed(nodes) @ _GL_WEIGHTS)

    def _build_table(self):
        phi = np.linspace(0.0, TWO_PI, TABLE_SIZE + 1)
        cells = self._gl_length(phi[:-1], phi[1:])
        s = np.concatenate([[0.0], np.cumsum(cells)])
        self._table_phi = phi
        self._table_s = s
        self.length = float(s[-1])
        self._spline = CubicSpline(s, phi)

    @property
    def arclength_table(self):
        return self._table_s, self._table_phi

    def arclength(self, phi):
        """Arc length from phi = 0 to ``phi`` (any real phi; periodic extension)."""
        phi = np.asarray(phi, dtype=float)
        if self.kind == "circle":
            return self.params[0] * phi
        turns = np.floor(phi / TWO_PI)
        red = phi - turns * TWO_PI
        step = TWO_PI / TABLE_SIZE
        i = np.clip((red / step).astype(int), 0, TABLE_SIZE - 1)
        s = self._table_s[i] + self._gl_length(self._table_phi[i], red)
        return turns * self.length + s

    def param(self, s):
        """Curve parameter phi at arc length ``s`` (wrapped periodically)."""
        s = np.asarray(s, dtype=float)
        if self.kind == "circle":
            return s / self.params[0]
        turns = np.floor(s / self.length)
        red = s - turns * self.length
        phi = self._spline(red)
        for _ in range(2):
            phi = phi - (self.arclength(phi) - red) / self._speed(phi)
        return phi + turns * TWO_PI

    # -- point queries ----------------------------------------------------------

    def frame_at(self, phi) -> FramePacket:
        phi = np.asarray(phi, dtype=float)
        d = self.derivatives(phi, 3)
        speed = np.hypot(d[1][..., 0], d[1][..., 1])
        tangent = d[1] / speed[..., None]
        if self.kind == "circle":
            R = self.params[0]
            k = np.full(phi.shape, 1.0 / R)
            rho = np.full(phi.shape, R)
            rho_p = np.zeros(phi.shape)
        else:
            c12 = cross(d[1], d[2])
            k = c12 / speed**3
            dk_dphi = cross(d[1], d[3]) / speed**3 - 3.0 * c12 * dot(d[1], d[2]) / speed**5
            rho = 1.0 / k
            rho_p = -(dk_dphi / speed) / k**2
        return FramePacket(d[0], tangent, rot90(tangent), k, rho, rho_p)

    def frame(self, s) -> FramePacket:
        return self.frame_at(self.param(s))

    def point(self, s):
        return self.derivatives(self.param(s), 0)[0]

    def point_at(self, phi):
        return self.derivatives(phi, 0)[0]

    def indicator(self, x: float, y: float) -> float:
        """Signed inside test: negative strictly inside, positive outside."""
        if self.kind == "circle":
            return math.hypot(x, y) - self.params[0]
        if self.kind == "ellipse":
            a, b = self.params
            return (x / a) ** 2 + (y / b) ** 2 - 1.0
        if self.kind == "trig":
            dx, dy = x - self.center[0], y - self.center[1]
            th = math.atan2(dy, dx)
            c0, harmonics = self.params
            r = c0
            for k, (a, b) in enumerate(harmonics, start=1):
                r += a * math.cos(k * th) + b * math.sin(k * th)
            return math.hypot(dx, dy) - r
        # polar body of the base curve: X inside iff <X - O, Y - O> < 1 for all Y on the base
        pole = self.params[0]
        samples = self._base_samples
        return float(np.max((samples - pole) @ (np.array([x, y]) - pole))) - 1.0

    def grid(self, n: int):
        """Cached (phi, points) on n equally spaced parameters in [0, 2*pi)."""
        cache = self.__dict__.setdefault("_grid_cache", {})
        if n not in cache:
            phi = np.linspace(0.0, TWO_PI, n, endpoint=False)
            cache[n] = (phi, self.point_at(phi))
        return cache[n]

    def xy(self, phi: float) -> tuple[float, float]:
        """Scalar point evaluation without array overhead."""
        if self.kind in ("circle", "ellipse"):
            A, B = (self.params[0], self.params[0]) if self.kind == "circle" else self.params
            return A * math.cos(phi), B * math.sin(phi)
        if self.kind == "trig":
            r = float(self.radial_function(phi))
            return self.center[0] + r * math.cos(phi), self.center[1] + r * math.sin(phi)
        p = self.point_at(phi)
        return float(p[0]), float(p[1])

    @cached_property
    def _base_samples(self):
        return self._base.point_at(np.linspace(0.0, TWO_PI, 8 * TABLE_SIZE, endpoint=False))

    def param_of_point(self, x: float, y: float) -> float:
        """Parameter of a point lying on the curve, in [0, 2*pi)."""
        if self.kind == "circle":
            phi = math.atan2(y, x)
        elif self.kind == "ellipse":
            a, b = self.params
            phi = math.atan2(y / b, x / a)
        elif self.kind == "trig":
            phi = math.atan2(y - self.center[1], x - self.center[0])
        else:
            pts = self.point_at(self._table_phi[:-1])
            i = int(np.argmin(np.hypot(pts[:, 0] - x, pts[:, 1] - y)))
            phi = float(self._table_phi[i])
            target = np.array([x, y])
            for _ in range(30):
                d = self.derivatives(phi, 2)
                g = dot(d[0] - target, d[1])
                gp = dot(d[1], d[1]) + dot(d[0] - target, d[2])
                delta = float(g / gp)
                phi -= delta
                if abs(delta) < 1e-15:
                    break
        return phi % TWO_PI

    # -- curvature extrema -------------------------------------------------------

    @cached_property
    def curvature_range(self) -> tuple[float, float]:
        """(k_min, k_max): dense grid refined by bounded scalar minimization."""
        if self.kind == "circle":
            k = 1.0 / self.params[0]
            return k, k
        phi = np.linspace(0.0, TWO_PI, EXTREMUM_GRID, endpoint=False)
        k = self._curvature_at(phi)
        step = TWO_PI / EXTREMUM_GRID
        out = []
        for sign, i in ((1.0, int(np.argmin(k))), (-1.0, int(np.argmax(k)))):
            res = minimize_scalar(
                lambda t: sign * float(self._curvature_at(np.array(t))),
                bounds=(phi[i] - step, phi[i] + step),
                method="bounded",
                options={"xatol": 1e-13},
            )
            out.append(sign * min(float(res.fun), sign * float(k[i])))
        return out[0], out[1]

    @property
    def rho_range(self) -> tuple[float, float]:
        kmin, kmax = self.curvature_range
        return 1.0 / kmax, 1.0 / kmin


def dual_curve(curve: ConvexCurve, pole=(0.0, 0.0)) -> ConvexCurve:
    """Polar dual of ``curve`` about ``pole``: the points dual to its tangent lines."""
    pole = np.asarray(pole, dtype=float)
    if curve.indicator(*pole) >= 0:
        raise CurveError("pole must lie strictly inside the curve")
    return ConvexCurve("dual", (pole,), _base=curve)


def eval_frame(curve: ConvexCurve, s) -> FramePacket:
    return curve.frame(s)


def offset_point(curve: ConvexCurve, s, d):
    """gamma(s) + d * J gamma'(s); d = +r gives the inner offset, d = -r the outer one."""
    f = curve.frame(s)
    return f.point + np.asarray(d, dtype=float)[..., None] * f.inward_normal


def offset_tangent_scale(curve: ConvexCurve, s, d):
    """Factor (1 - k d) with d/ds offset(s, d) = (1 - k d) gamma'(s)."""
    return 1.0 - curve.frame(s).k * d


def find_cusps(curve: ConvexCurve, r: float, tol: float = 1e-12) -> list[Cusp]:
    """Cusps of the inner offset at distance ``r``: regular solutions of rho(s) = r.

    Degenerate solutions (rho' ~ 0) are excluded and reported through a
    :class:`CuspDegeneracyWarning`.
    """
    if not r > 0:
        raise ValueError("offset distance must be positive")
    rho_lo, rho_hi = curve.rho_range
    if r < rho_lo or r > rho_hi or curve.kind == "circle":
        return []
    L = curve.length
    s = np.linspace(0.0, L, CUSP_GRID, endpoint=False)
    g = curve.frame(s).rho - r

    def fun(t):
        return float(curve.frame(t).rho) - r

    roots = []
    for i in range(CUSP_GRID):
        j = (i + 1) % CUSP_GRID
        lo, hi = s[i], s[i] + L / CUSP_GRID
        if g[i] == 0.0:
            roots.append(float(s[i]))
        elif g[i] * g[j] < 0:
            roots.append(bisect(fun, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps))
    # tangential roots (rho touches r at an extremum) give no sign change
    for i in range(CUSP_GRID):
        a, b = g[i - 1], g[(i + 1) % CUSP_GRID]
        same_sign = a * g[i] > 0 and b * g[i] > 0
        if same_sign and (a - g[i]) * (b - g[i]) > 0 and abs(g[i]) < 1e-6 * max(1.0, r):
            sign = 1.0 if a > g[i] else -1.0
            res = minimize_scalar(lambda t: sign * fun(t), bounds=(s[i] - L / CUSP_GRID, s[i] + L / CUSP_GRID),
                                  method="bounded", options={"xatol": tol})
            if abs(res.fun) < 1e-10 * max(1.0, r):
                roots.append(float(res.x))
    roots = sorted(t % L for t in roots)
    roots = [t for k, t in enumerate(roots) if k == 0 or t - roots[k - 1] > 1e-9 * L]
    if len(roots) > 1 and roots[0] + L - roots[-1] <= 1e-9 * L:
        roots.pop()
    cusps, degenerate = [], []
    for t in roots:
        f = curve.frame(t)
        if abs(float(f.rho_prime)) < 1e-8:
            degenerate.append(t)
            continue
        cusps.append(Cusp(t % L, f.point + r * f.inward_normal))
    if degenerate:
        warnings.warn(
            f"rho(s) = {r} at non-regular values s = {degenerate}; excluded",
            CuspDegeneracyWarning,
            stacklevel=2,
        )
    return cusps


def validate_weak_field(curve: ConvexCurve, beta: float) -> WeakFieldResult:
    """Pass iff 0 < beta < k_min.  A failure is returned, not raised."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    k_min = curve.curvature_range[0]
    return WeakFieldResult(bool(beta < k_min), k_min, k_min - beta)
