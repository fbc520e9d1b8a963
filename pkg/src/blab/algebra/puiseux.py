"""Numeric branch analysis at a singular point of an affine curve.

Each real half-branch entering the point is followed inward on a sequence of
shrinking circles.  Working coordinates are rotated so the branch tangent is
the first axis; the branch then looks like ``Y ~ c X^(p/q)`` and the exponent
is read off a log-log fit.  The polynomial is re-expanded about the point in
mpmath before rounding, so the local coefficients that should vanish are tiny
instead of being dominated by cancellation.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from itertools import combinations

import mpmath
import numpy as np
from scipy.optimize import brentq, minimize_scalar

from ..errors import BranchTraceFailed, ConfigError
from .polynomial import BivariatePolynomial
from .singular import MP_DPS, VERIFY_TOL, refine_singular_point, singular_residual

START_RADIUS = 1e-2
INNER_RADIUS = 1e-7
RADII_PER_DECADE = 10
FIT_WINDOW = (1e-7, 1e-5)
ARC_SAMPLES = 2001
MIN_FIT_SAMPLES = 3
# indices this far below 2 count as sub-quadratic; numeric estimates of 2 land within ~1e-6
INDEX_BAND = 0.1


@dataclass(frozen=True)
class BranchEstimate:
    base_point: tuple
    puiseux_index: float
    index_ci: tuple
    order_a: float | None = None
    order_b: float | None = None
    samples_used: int = 0
    tangent: tuple = (1.0, 0.0)
    radii: np.ndarray = field(default=None, repr=False, compare=False)
    offsets: np.ndarray = field(default=None, repr=False, compare=False)

    @property
    def sub_quadratic(self) -> bool:
        return self.puiseux_index < 2.0 - INDEX_BAND


def local_polynomial(poly: BivariatePolynomial, x0, y0, angle, dps: int = MP_DPS) -> BivariatePolynomial:
    """f(x0 + R(angle) (X, Y)) expanded in mpmath and rounded to doubles."""
    with mpmath.workdps(dps):
        shifted = poly.taylor_shift_mp(x0, y0)
        c, s = mpmath.cos(angle), mpmath.sin(angle)
        out: dict[tuple[int, int], mpmath.mpf] = {}
        # u = c X - s Y, v = s X + c Y
        for (i, j), coef in shifted.items():
            if coef == 0:
                continue
            for a in range(i + 1):
                ua = coef * math.comb(i, a) * c**a * (-s) ** (i - a)
                for b in range(j + 1):
                    key = (a + b, (i - a) + (j - b))
                    out[key] = out.get(key, 0) + ua * math.comb(j, b) * s**b * c ** (j - b)
        return BivariatePolynomial({k: float(v) for k, v in out.items() if v != 0})


def tangent_directions(poly: BivariatePolynomial, x0, y0, dps: int = MP_DPS):
    """Angles in [0, pi) of the tangent-cone lines at (x0, y0)."""
    with mpmath.workdps(dps):
        coeffs = poly.taylor_shift_mp(x0, y0)
        scale = max((abs(v) for v in coeffs.values()), default=mpmath.mpf(0))
        if scale == 0:
            return []
        floor = scale * mpmath.mpf(10) ** (-(dps // 2 - 5))
        degree = max(a + b for a, b in coeffs)
        for m in range(degree + 1):
            part = [coeffs.get((a, m - a), mpmath.mpf(0)) for a in range(m + 1)]
            if max(abs(v) for v in part) > floor:
                break
        else:
            return []
        if m == 0:
            return []
        # h(1, t) = sum_a part[a] t^(m-a); roots give tan(angle)
        poly_t = [part[a] for a in range(m + 1)]  # highest power t^m first (a = 0)
        local_floor = max(abs(v) for v in part) * mpmath.mpf(10) ** (-(dps // 2 - 5))
        angles = []
        lead = 0
        while lead < len(poly_t) and abs(poly_t[lead]) <= local_floor:
            lead += 1
            angles.append(math.pi / 2)
        trimmed = poly_t[lead:]
        if len(trimmed) > 1:
            try:
                roots = mpmath.polyroots(trimmed, maxsteps=400, extraprec=4 * dps)
            except mpmath.libmp.NoConvergence:
                roots = [complex(r) for r in np.roots([float(v) for v in trimmed])]
            for r in roots:
                r = mpmath.mpc(r)
                if abs(r.imag) <= mpmath.mpf(10) ** (-(dps // 4)) * (1 + abs(r)):
                    angles.append(float(mpmath.atan(r.real)) % math.pi)
        out = []
        for a in sorted(angles):
            if all(min(abs(a - b), math.pi - abs(a - b)) > 1e-9 for b in out):
                out.append(a)
        return out


def _arc_value(G: BivariatePolynomial, rho, delta):
    return G(rho * np.cos(delta), rho * np.sin(delta))


def _roots_on_arc(G, rho, lo, hi, n=ARC_SAMPLES):
    """Zeros of G(rho cos d, rho sin d) for d in [lo, hi]."""
    d = np.linspace(lo, hi, n)
    g = _arc_value(G, rho, d)
    fun = lambda t: float(_arc_value(G, rho, t))
    roots = []
    for i in range(n - 1):
        if g[i] == 0.0:
            roots.append(float(d[i]))
        elif g[i] * g[i + 1] < 0:
            roots.append(brentq(fun, d[i], d[i + 1], xtol=1e-300, rtol=1e-15, maxiter=200))
    # pairs of roots closer than the grid spacing hide near a local extremum of |g|
    a = np.abs(g)
    for i in range(1, n - 1):
        if a[i] <= a[i - 1] and a[i] <= a[i + 1] and g[i - 1] * g[i + 1] > 0 and g[i] * g[i - 1] > 0:
            sign = np.sign(g[i])
            res = minimize_scalar(
                lambda t: sign * fun(t), bounds=(d[i - 1], d[i + 1]), method="bounded",
                options={"xatol": 1e-16 * max(1.0, abs(d[i]))},
            )
            if res.fun < 0:
                roots.append(brentq(fun, d[i - 1], res.x, xtol=1e-300, rtol=1e-15, maxiter=200))
                roots.append(brentq(fun, res.x, d[i + 1], xtol=1e-300, rtol=1e-15, maxiter=200))
    return sorted(roots)


def _track(G, delta0, radii):
    """Follow one root of G on the circles ``radii``; returns the offsets found."""
    deltas = [delta0]
    fun_at = lambda rho: (lambda t: float(_arc_value(G, rho, t)))
    for k, rho in enumerate(radii[1:], start=1):
        prev = deltas[-1]
        if prev == 0.0:
            deltas.append(0.0)
            continue
        if len(deltas) >= 2 and deltas[-2] != 0.0:
            ratio = min(max(prev / deltas[-2], 0.0), 4.0)
            pred = prev * ratio if ratio > 0 else prev
        else:
            pred = prev
        fun = fun_at(rho)
        found = None
        for w in (0.02, 0.05, 0.15, 0.4, 0.8, 0.99):
            lo, hi = pred - w * abs(pred), pred + w * abs(pred)
            pts = np.linspace(lo, hi, 17)
            vals = _arc_value(G, rho, pts)
            best = None
            for i in range(16):
                if vals[i] == 0.0:
                    cand = (abs(pts[i] - pred), pts[i], pts[i])
                elif vals[i] * vals[i + 1] < 0:
                    cand = (abs(0.5 * (pts[i] + pts[i + 1]) - pred), pts[i], pts[i + 1])
                else:
                    continue
                if best is None or cand[0] < best[0]:
                    best = cand
            if best is not None:
                _, a, b = best
                found = a if a == b else brentq(fun, a, b, xtol=1e-300, rtol=1e-15, maxiter=200)
                break
        if found is None:
            return deltas, k
        deltas.append(found)
    return deltas, None


def _pairwise_slopes(u, v):
    slopes = [(v[j] - v[i]) / (u[j] - u[i]) for i, j in combinations(range(len(u)), 2) if u[j] != u[i]]
    return np.asarray(slopes)


def _median_iqr(slopes):
    if len(slopes) == 0:
        return math.inf, (math.inf, math.inf)
    med = float(np.median(slopes))
    lo, hi = np.percentile(slopes, [25, 75])
    return med, (float(min(lo, med)), float(max(hi, med)))


def estimate_branch(
    poly: BivariatePolynomial,
    singular_point,
    aux: BivariatePolynomial | None = None,
    *,
    start_radius: float = START_RADIUS,
    inner_radius: float = INNER_RADIUS,
    per_decade: int = RADII_PER_DECADE,
    window=FIT_WINDOW,
    strict: bool = False,
) -> list[BranchEstimate]:
    """Estimate the Puiseux index p/q of every real half-branch at a singular point.

    With ``aux`` given, also reports the log-log slopes of |H(aux)| and
    |grad aux|^3 along each branch, per unit log of the adapted coordinate.
    Half-branches that cannot be followed to ``inner_radius`` raise
    :class:`BranchTraceFailed` when ``strict``, otherwise they are skipped
    with a warning.
    """
    x0, y0 = refine_singular_point(poly, singular_point)
    fr, gr = singular_residual(poly, (x0, y0))
    if fr > VERIFY_TOL or gr > VERIFY_TOL:
        raise ConfigError(
            f"({float(x0):.6g}, {float(y0):.6g}) is not a singular point (|f| {fr:.2g}, |grad f| {gr:.2g})"
        )
    base = (float(x0), float(y0))
    lines = tangent_directions(poly, x0, y0)
    halves = sorted({a % (2 * math.pi) for t in lines for a in (t, t + math.pi)})
    n_steps = int(round(per_decade * math.log10(start_radius / inner_radius)))
    radii = start_radius * 10.0 ** (-np.arange(n_steps + 1) / per_decade)
    results = []
    branch_id = 0
    for k, alpha in enumerate(halves):
        if len(halves) > 1:
            gap = min(
                (alpha - halves[k - 1]) % (2 * math.pi),
                (halves[(k + 1) % len(halves)] - alpha) % (2 * math.pi),
            )
            half_window = min(0.5 * gap, math.pi / 2) * 0.98
        else:
            half_window = math.pi / 2
        G = local_polynomial(poly, x0, y0, alpha)
        A = local_polynomial(aux, x0, y0, alpha) if aux is not None else None
        for d0 in _roots_on_arc(G, radii[0], -half_window, half_window):
            deltas, failed_at = _track(G, d0, radii)
            if failed_at is not None:
                msg = f"branch {branch_id} at {base} lost at radius {radii[failed_at - 1]:.3g}"
                branch_id += 1
                if strict:
                    raise BranchTraceFailed(msg, branch=branch_id - 1, radius_reached=float(radii[failed_at - 1]))
                warnings.warn(msg, RuntimeWarning, stacklevel=2)
                continue
            branch_id += 1
            est = _fit(base, alpha, radii, np.asarray(deltas), A, window)
            if est.samples_used < MIN_FIT_SAMPLES:
                msg = f"branch {branch_id - 1} at {base} has {est.samples_used} samples in the fit window"
                if strict:
                    raise BranchTraceFailed(msg, branch=branch_id - 1, radius_reached=float(radii[-1]))
                warnings.warn(msg, RuntimeWarning, stacklevel=2)
                continue
            results.append(est)
    return results


def _fit(base, alpha, radii, deltas, A, window):
    X = radii * np.cos(deltas)
    Y = radii * np.sin(deltas)
    sel = (radii >= window[0] * (1 - 1e-9)) & (radii <= window[1] * (1 + 1e-9)) & (Y != 0)
    tangent = (math.cos(alpha), math.sin(alpha))
    if not np.any(sel):
        return BranchEstimate(base, math.inf, (math.inf, math.inf), None, None, 0, tangent, radii, deltas)
    lx = np.log(np.abs(X[sel]))
    ly = np.log(np.abs(Y[sel]))
    index, ci = _median_iqr(_pairwise_slopes(lx, ly))
    order_a = order_b = None
    if A is not None:
        j = A.jet(X[sel], Y[sel])
        h = np.abs(j.affine_hessian)
        g3 = j.gradient_norm**3
        ok = (h > 0) & (g3 > 0)
        if ok.sum() >= 2:
            order_a = float(np.median(_pairwise_slopes(lx[ok], np.log(h[ok]))))
            order_b = float(np.median(_pairwise_slopes(lx[ok], np.log(g3[ok]))))
    return BranchEstimate(base, index, ci, order_a, order_b, int(sel.sum()), tangent, radii, deltas)
