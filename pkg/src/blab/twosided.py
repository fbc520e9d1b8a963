"""Two-sided magnetic billiard: the Larmor orientation flips at every collision.

Conventions: J is rotation by +90 degrees, the boundary runs counterclockwise,
side 1 carries counterclockwise Larmor circles and side 2 clockwise ones.
The collision angle eps satisfies cos eps = <w, tangent>, sin eps = <w, n> > 0
for the outgoing velocity w and inward normal n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .algebra.polynomial import PHASE, BivariatePolynomial, Polynomial
from .algebra.puiseux import INDEX_BAND, BranchEstimate, estimate_branch
from .algebra.singular import find_singular_points
from .curves import ConvexCurve, offset_point
from .errors import BothDegenerate, ConfigError, NumericalError, SingularGradient
from .magnetic import CCW, CW, CenterAnnulus, larmor_exit, offset_polynomial, require_weak_field, rot90

VERDICT_NEGATIVE = "not algebraically integrable"
VERDICT_NONE = "no obstruction found"
CROSSCHECK_TOL = 1e-10


def rotate(v, angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([c * v[0] - s * v[1], s * v[0] + c * v[1]])


@dataclass(frozen=True)
class SidedCenter:
    point: np.ndarray
    side: int

    def __post_init__(self):
        if self.side not in (1, 2):
            raise ConfigError(f"side must be 1 or 2, got {self.side}")
        object.__setattr__(self, "point", np.asarray(self.point, dtype=float))

    @property
    def orientation(self) -> str:
        return CCW if self.side == 1 else CW

    def flipped(self) -> "SidedCenter":
        return SidedCenter(self.point, 3 - self.side)


@dataclass(frozen=True)
class TwoSidedCollision:
    before: SidedCenter
    after: SidedCenter
    s: float
    point: np.ndarray
    cos_eps: float
    eps: float


def twosided_collision(curve: ConvexCurve, r: float, c: SidedCenter, check: bool = False) -> TwoSidedCollision:
    col = larmor_exit(curve, r, c.point, c.orientation)
    w = col.outgoing
    if c.side == 1:
        nxt = SidedCenter(col.point - r * rot90(w), 2)
    else:
        nxt = SidedCenter(col.point + r * rot90(w), 1)
    eps = col.eps
    if check:
        closed_form_crosscheck(col.point, col.normal, eps, r, c, nxt)
    return TwoSidedCollision(c, nxt, col.s, col.point, col.cos_eps, eps)


def closed_form_crosscheck(z, n, eps, r, before: SidedCenter, after: SidedCenter, tol=CROSSCHECK_TOL):
    """Compare centers with z + r R(-eps) n / z - r R(eps) n (side 1 -> 2) or the mirrored pair."""
    sign = 1.0 if before.side == 1 else -1.0
    expect_before = z + sign * r * rotate(n, -eps)
    expect_after = z - sign * r * rotate(n, eps)
    err = max(np.hypot(*(expect_before - before.point)), np.hypot(*(expect_after - after.point)))
    if err > tol:
        raise NumericalError(f"closed-form center mismatch {err:.3g} at z={tuple(map(float, z))}")
    return err


def twosided_step(curve: ConvexCurve, r: float, c: SidedCenter, check: bool = False) -> SidedCenter:
    """The map M: exit along c's Larmor circle, reflect, continue on the opposite side."""
    require_weak_field(curve, r)
    return twosided_collision(curve, r, c, check).after


def twosided_orbit(curve: ConvexCurve, r: float, c0: SidedCenter, n_steps: int, check: bool = False):
    require_weak_field(curve, r)
    out = []
    c = c0
    for _ in range(n_steps):
        col = twosided_collision(curve, r, c, check)
        out.append(col)
        c = col.after
    return out


def _map_point(curve, r, p, side):
    return twosided_collision(curve, r, SidedCenter(p, side)).after.point


def jacobian(curve: ConvexCurve, r: float, c: SidedCenter, h: float = 1e-5) -> np.ndarray:
    J = np.zeros((2, 2))
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        J[:, i] = (_map_point(curve, r, c.point + e, c.side) - _map_point(curve, r, c.point - e, c.side)) / (2 * h)
    return J


def side_orientation(side: int) -> float:
    """Sign of the area form on a side: +1 where Larmor circles run counterclockwise."""
    return 1.0 if side == 1 else -1.0


def symplecticity_residual(curve: ConvexCurve, r: float, c: SidedCenter, h: float = 1e-5) -> float:
    """|det DM - 1| with det taken between the oriented area forms of the two sides.

    M always changes side, and the two sides carry opposite orientations, so
    the plain Euclidean determinant of the center map is -1.
    """
    require_weak_field(curve, r)
    det = float(np.linalg.det(jacobian(curve, r, c, h)))
    return abs(side_orientation(c.side) * side_orientation(3 - c.side) * det - 1.0)


# -- integrals of the center map ---------------------------------------------------


@dataclass(frozen=True)
class IntegralPair:
    """Center functions (F1 on side 1, F2 on side 2), or phase functions of (x, y, v1, v2)."""

    F1: Polynomial
    F2: Polynomial

    def __post_init__(self):
        if self.F1.is_zero() or self.F2.is_zero():
            raise ConfigError("integral pair members must not vanish identically")

    @property
    def phase(self) -> bool:
        return self.F1.variables == PHASE

    @property
    def degenerate(self) -> bool:
        return self.F1.is_constant() and self.F2.is_constant()


@dataclass(frozen=True)
class PairReport:
    condition1: float
    condition2: float
    degenerate: bool


def _phase_eval(F: Polynomial, x, v):
    return float(F(x[0], x[1], v[0], v[1]))


def check_integral_pair(curve: ConvexCurve, r: float, pair: IntegralPair, trial_centers, n_arc: int = 32) -> PairReport:
    """Residuals of the two defining conditions of a two-sided integral pair.

    Condition 1 (constancy along Larmor circles) holds by construction for
    center functions and is sampled along arcs for phase functions.
    Condition 2 compares the two sides across every sampled collision, in both
    directions.
    """
    require_weak_field(curve, r)
    cond1 = 0.0
    cond2 = 0.0
    for p in np.asarray(trial_centers, dtype=float):
        for side in (1, 2):
            c = SidedCenter(p, side)
            col = larmor_exit(curve, r, p, c.orientation)
            nxt = twosided_collision(curve, r, c).after
            F_here, F_next = (pair.F1, pair.F2) if side == 1 else (pair.F2, pair.F1)
            if pair.phase:
                gap = _phase_eval(F_here, col.point, col.incoming) - _phase_eval(F_next, col.point, col.outgoing)
                sign = 1.0 if side == 1 else -1.0
                vals = []
                for th in np.linspace(0.0, 2 * math.pi, n_arc, endpoint=False):
                    u = np.array([math.cos(th), math.sin(th)])
                    vals.append(_phase_eval(F_here, p + r * u, sign * rot90(u)))
                cond1 = max(cond1, max(vals) - min(vals))
            else:
                gap = float(F_here(*c.point)) - float(F_next(*nxt.point))
            cond2 = max(cond2, abs(gap))
    return PairReport(cond1, cond2, pair.degenerate)


def combine_pair(curve: ConvexCurve, r: float, pair: IntegralPair, samples=None, rng=None, tol: float = 1e-8) -> Polynomial:
    """F1 + F2 if it is non-constant on the center annulus, otherwise (F1 - F2)^2."""
    rng = rng if rng is not None else np.random.default_rng(0)
    annulus = CenterAnnulus(curve, r)
    if samples is None:
        samples = annulus.sample(rng, 100, margin=1e-3)
    rep = check_integral_pair(curve, r, pair, samples)
    if rep.condition2 > tol:
        raise NumericalError(f"pair violates the collision relations (residual {rep.condition2:.3g})")
    for F in (pair.F1 + pair.F2, (pair.F1 - pair.F2) ** 2):
        vals = np.array([float(F(*p)) for p in samples])
        if np.var(vals) > tol:
            return F
    raise BothDegenerate("both F1 + F2 and (F1 - F2)^2 are constant on the center annulus")


def orbit_invariance_deviation(curve: ConvexCurve, r: float, F: BivariatePolynomial, c0: SidedCenter, n_steps: int) -> float:
    """max |F(c_i) - F(c_0)| / max(1, |F(c_0)|) along the M-orbit."""
    cols = twosided_orbit(curve, r, c0, n_steps)
    pts = np.array([c0.point] + [c.after.point for c in cols])
    vals = F(pts[:, 0], pts[:, 1])
    return float(np.max(np.abs(vals - vals[0])) / max(1.0, abs(vals[0])))


# -- boundary identities -----------------------------------------------------------


@dataclass(frozen=True)
class BoundaryConstancy:
    c: float
    spread_inner: float
    spread_outer: float
    gap: float


def boundary_constancy_residual(F: BivariatePolynomial, curve: ConvexCurve, r: float, n: int = 512) -> BoundaryConstancy:
    """Sample F on both offsets; report the mean, per-boundary spreads and the gap of the means."""
    s = np.linspace(0.0, curve.length, n, endpoint=False)
    inner = offset_point(curve, s, r)
    outer = offset_point(curve, s, -r)
    fi = F(inner[:, 0], inner[:, 1])
    fo = F(outer[:, 0], outer[:, 1])
    return BoundaryConstancy(
        float(np.mean(np.concatenate([fi, fo]))),
        float(np.ptp(fi)),
        float(np.ptp(fo)),
        float(abs(np.mean(fi) - np.mean(fo))),
    )


def normalize_on_boundaries(F: BivariatePolynomial, curve: ConvexCurve, r: float) -> BivariatePolynomial:
    """F - c, where c is the common boundary value."""
    return F - boundary_constancy_residual(F, curve, r).c


def remarkable_points(curve: ConvexCurve, r: float, s, eps):
    """The two evaluation points of the functional equation: gamma + r R(-eps) n and gamma - r R(eps) n."""
    f = curve.frame(s)
    z, n = f.point, f.inward_normal
    left = z + r * rotate(n, -eps)   # = z_plus - r (I - R(-eps)) n
    right = z - r * rotate(n, eps)   # = z_minus + r (I - R(eps)) n
    return left, right


def remarkable_residual(F: BivariatePolynomial, curve: ConvexCurve, r: float, s: float, eps: float) -> float:
    """|F(z+ - r(I - R(-eps))n) - F(z- + r(I - R(eps))n)|; at eps = 0 this is |F(z+) - F(z-)|."""
    left, right = remarkable_points(curve, r, s, eps)
    return abs(float(F(*left)) - float(F(*right)))


# -- factored integrals --------------------------------------------------------------


@dataclass(frozen=True)
class FactoredIntegral:
    """F~ = f g with f = f_plus (one offset polynomial) or f_plus f_minus."""

    f_plus: BivariatePolynomial
    f_minus: BivariatePolynomial | None = None
    k: int = 1
    l: int = 1
    g: BivariatePolynomial | None = None

    def __post_init__(self):
        if self.f_minus is not None and self.f_minus != self.f_plus and self.k != self.l:
            raise ConfigError(f"two distinct offset factors need equal multiplicities, got k={self.k}, l={self.l}")

    @property
    def f(self) -> BivariatePolynomial:
        if self.f_minus is None or self.f_minus == self.f_plus:
            return self.f_plus
        return self.f_plus * self.f_minus

    @property
    def Ft(self) -> BivariatePolynomial:
        return self.f if self.g is None else self.f * self.g

    def check_cofactor(self, curve: ConvexCurve, r: float, n: int = 512, floor: float = 1e-9):
        """Points on the offsets where |g| <= floor; raises if g changes sign along an offset."""
        if self.g is None:
            return []
        s = np.linspace(0.0, curve.length, n, endpoint=False)
        flagged = []
        for d in (r, -r):
            p = offset_point(curve, s, d)
            gv = self.g(p[:, 0], p[:, 1])
            small = np.abs(gv) <= floor
            flagged.extend(map(tuple, p[small]))
            big = gv[~small]
            if big.size and (big.min() < 0 < big.max()):
                raise ConfigError("cofactor g changes sign along an offset curve")
        return flagged


def _as_poly(Ft) -> BivariatePolynomial:
    return Ft.Ft if isinstance(Ft, FactoredIntegral) else Ft


def gradient_ratio_residual(Ft, curve: ConvexCurve, r: float, s: float) -> float:
    """| |grad F~(z+)| / |grad F~(z-)| - (r - rho)/(r + rho) |."""
    P = _as_poly(Ft)
    f = curve.frame(s)
    zp = f.point + r * f.inward_normal
    zm = f.point - r * f.inward_normal
    gp = float(P.jet(*zp).gradient_norm)
    gm = float(P.jet(*zm).gradient_norm)
    if gp == 0.0 or gm == 0.0:
        raise SingularGradient(f"gradient vanishes at an offset point for s={s}")
    rho = float(f.rho)
    return abs(gp / gm - (r - rho) / (r + rho))


@dataclass(frozen=True)
class OdePacket:
    A: float
    B: float
    mu: float
    u: float | None = None
    A_prime: float = 0.0


def ode_and_factor(curve: ConvexCurve, r: float, s: float, Ft=None) -> OdePacket:
    """Coefficients of A u' + B u = 0 along the inner offset and the integrating factor mu.

    A = 2 rho / (r^2 - rho^2), B = A' + 6 rho rho' / ((r + rho)^2 (r - rho)),
    mu = 2 rho (r + rho)^2 / (r - rho); A' is taken analytically through rho'.
    """
    f = curve.frame(s)
    rho, rho_p = float(f.rho), float(f.rho_prime)
    if not r > rho:
        raise ConfigError(f"need r > rho(s); got r={r}, rho={rho}")
    A = 2.0 * rho / (r * r - rho * rho)
    A_p = 2.0 * (r * r + rho * rho) / (r * r - rho * rho) ** 2 * rho_p
    B = A_p + 6.0 * rho * rho_p / ((r + rho) ** 2 * (r - rho))
    mu = 2.0 * rho * (r + rho) ** 2 / (r - rho)
    u = None
    if Ft is not None:
        z = f.point + r * f.inward_normal
        u = float(_as_poly(Ft).jet(*z).gradient_norm) ** 3
    return OdePacket(A, B, mu, u, A_p)


@dataclass(frozen=True)
class ConstancyReport:
    C: float
    spread: float
    skipped: int
    values: np.ndarray = field(repr=False, compare=False)


def cubic_gradient_values(Ft, curve: ConvexCurve, r: float, n_samples: int = 512, h_floor: float = 1e-9):
    """q = 2 (2 r H - |grad|^3)^2 (r H - |grad|^3) / H^2 along the inner offset."""
    P = _as_poly(Ft)
    s = np.linspace(0.0, curve.length, n_samples, endpoint=False)
    z = offset_point(curve, s, r)
    j = P.jet(z[:, 0], z[:, 1])
    H = j.affine_hessian
    G3 = j.gradient_norm**3
    keep = np.abs(H) >= h_floor
    H, G3 = H[keep], G3[keep]
    q = 2.0 * (2.0 * r * H - G3) ** 2 * (r * H - G3) / H**2
    return q, int(np.count_nonzero(~keep))


def cubic_gradient_constancy(Ft, curve: ConvexCurve, r: float, n_samples: int = 512) -> ConstancyReport:
    q, skipped = cubic_gradient_values(Ft, curve, r, n_samples)
    C = float(np.mean(q))
    spread = float(np.ptp(q) / abs(C)) if C != 0 else math.inf
    return ConstancyReport(C, spread, skipped, q)


def mu_u_constancy(Ft, curve: ConvexCurve, r: float, n_samples: int = 512) -> tuple[float, float]:
    """(mean of mu u, relative spread) along the inner offset."""
    s = np.linspace(0.0, curve.length, n_samples, endpoint=False)
    vals = np.array([(lambda p: p.mu * p.u)(ode_and_factor(curve, r, si, Ft)) for si in s])
    mean = float(np.mean(vals))
    return mean, float(np.ptp(vals) / abs(mean))


# -- verdict -------------------------------------------------------------------------------


@dataclass
class Verdict:
    verdict: str
    r: float
    points: list
    branches: dict
    failures: list = field(default_factory=list)

    @property
    def obstructed(self) -> bool:
        return self.verdict == VERDICT_NEGATIVE

    def min_index(self):
        idx = [b.puiseux_index for bs in self.branches.values() for b in bs]
        return min(idx) if idx else None


def offset_search_box(curve: ConvexCurve, r: float, pad: float = 0.1):
    outer = offset_point(curve, np.linspace(0.0, curve.length, 512, endpoint=False), -r)
    lo, hi = outer.min(axis=0), outer.max(axis=0)
    w = pad * (hi - lo)
    return (lo[0] - w[0], hi[0] + w[0], lo[1] - w[1], hi[1] + w[1])


def subquadratic_verdict(curve: ConvexCurve, r: float, band: float = INDEX_BAND) -> Verdict:
    """Search the offset polynomial for real branches with Puiseux index below 2.

    Any index below 2 - band means the two-sided billiard cannot carry a
    polynomial integral.
    """
    poly = offset_polynomial(curve, r)
    points = find_singular_points(poly, offset_search_box(curve, r))
    branches: dict[tuple, list[BranchEstimate]] = {}
    for p in points:
        branches[p] = estimate_branch(poly, p, aux=poly)
    obstructed = any(b.puiseux_index < 2.0 - band for bs in branches.values() for b in bs)
    return Verdict(VERDICT_NEGATIVE if obstructed else VERDICT_NONE, r, points, branches)


def disk_integral(r: float, R: float = 1.0) -> BivariatePolynomial:
    """(x^2 + y^2 - R^2 - r^2)^2 - 4 R^2 r^2, invariant for the two-sided map in a disk of radius R."""
    q = Polynomial.parse("x^2 + y^2")
    return (q - (R * R + r * r)) ** 2 - 4 * R * R * r * r


def disk_factored_integral(r: float, R: float = 1.0) -> FactoredIntegral:
    q = Polynomial.parse("x^2 + y^2")
    return FactoredIntegral(q - (r - R) ** 2, q - (r + R) ** 2)
