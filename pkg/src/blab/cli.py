"""Command-line front end: simulations, residual checks, singular points and verdicts.

Exit codes: 0 success, 1 configuration or validation error, 2 numerical
failure, 3 at least one check reported FAIL.
"""

from __future__ import annotations

import argparse
import math
import re
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import io
from .algebra.polynomial import PHASE, SIGMA_V, XY, Polynomial
from .algebra.puiseux import estimate_branch
from .algebra.singular import find_singular_points
from .birkhoff import circle_integral, ellipse_integral, integral_deviation, launch, orbit
from .curves import ConvexCurve, find_cusps
from .dual import (
    DualityFrame,
    angular_orbit,
    ellipse_angular_integral,
    hessian_power_residual,
    radial_samples,
    shift_equation_residual,
    transport_integral,
)
from .errors import BlabError, ConfigError, NumericalError
from .magnetic import CCW, CW, CenterAnnulus, larmor_exit, magnetic_orbit, offset_polynomial, offset_vanishing_residual
from .svg import Scene, arc_points
from .twosided import (
    VERDICT_NEGATIVE,
    FactoredIntegral,
    IntegralPair,
    SidedCenter,
    boundary_constancy_residual,
    check_integral_pair,
    cubic_gradient_constancy,
    disk_factored_integral,
    disk_integral,
    gradient_ratio_residual,
    orbit_invariance_deviation,
    remarkable_residual,
    subquadratic_verdict,
    symplecticity_residual,
    twosided_orbit,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_FAIL = 0, 1, 2, 3
MODELS = ("birkhoff", "angular", "magnetic", "twosided")
SYMPLECTIC_MARGIN = 0.05
INTEGRAL_VARIABLES = {"birkhoff": PHASE, "angular": SIGMA_V, "twosided": XY, "magnetic": None}


# -- configuration -------------------------------------------------------------------


def _pair(text: str) -> tuple[float, float]:
    parts = [p for p in re.split(r"[,\s]+", str(text).strip()) if p]
    if len(parts) != 2:
        raise ConfigError(f"expected two comma-separated numbers, got {text!r}")
    return float(parts[0]), float(parts[1])


@dataclass
class RunConfig:
    model: str
    curve: str
    beta: float | None = None
    r: float | None = None
    s0: float = 0.0
    eps0: float = 1.0
    c0: tuple | None = None
    side: int = 1
    a0: tuple | None = None
    pole: tuple = (0.0, 0.0)
    n: int = 1000
    integral: str | None = None
    out: str | None = None
    svg: str | None = None
    figure: str | None = None
    report: bool = False
    tol: float | None = None

    _converters = {
        "beta": float, "r": float, "s0": float, "eps0": float, "c0": _pair, "side": int,
        "a0": _pair, "pole": _pair, "n": int, "tol": float,
        "report": lambda v: str(v).strip().lower() in ("1", "true", "yes", "on"),
    }

    @classmethod
    def keys(cls):
        return [f.name for f in fields(cls)]

    @classmethod
    def from_mapping(cls, values: dict) -> "RunConfig":
        unknown = set(values) - set(cls.keys())
        if unknown:
            raise ConfigError(f"unknown key {sorted(unknown)[0]!r}")
        for req in ("model", "curve"):
            if values.get(req) is None:
                raise ConfigError(f"missing required key {req!r}")
        conv = {k: cls._converters.get(k, str)(v) if isinstance(v, str) else v for k, v in values.items()}
        cfg = cls(**conv)
        cfg.validate()
        return cfg

    @property
    def larmor_radius(self) -> float | None:
        if self.r is not None:
            return self.r
        return None if self.beta is None else 1.0 / self.beta

    def validate(self):
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}; choose from {', '.join(MODELS)}")
        ConvexCurve.parse(self.curve)
        if self.model in ("magnetic", "twosided"):
            if (self.beta is None) == (self.r is None):
                raise ConfigError("exactly one of beta/r must be given")
            if self.larmor_radius <= 0:
                raise ConfigError("the Larmor radius must be positive")
            if self.c0 is None:
                raise ConfigError(f"model {self.model} needs an initial center c0")
        elif self.beta is not None and self.r is not None:
            raise ConfigError("exactly one of beta/r must be given")
        if self.model == "angular" and self.a0 is None:
            raise ConfigError("model angular needs an initial point a0")
        if self.side not in (1, 2):
            raise ConfigError(f"side must be 1 or 2, got {self.side}")
        if self.n < 1:
            raise ConfigError("n must be at least 1")
        if self.integral is not None:
            variables = INTEGRAL_VARIABLES[self.model]
            if variables is None:
                raise ConfigError("model magnetic takes no attached integral")
            Polynomial.parse(self.integral, variables)


def parse_config(source) -> RunConfig:
    """Read ``key = value`` lines (``#`` starts a comment) from a path or an open file."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        try:
            text = Path(source).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {source}: {exc.strerror}") from None
    values, where = {}, {}
    keys = set(RunConfig.keys())
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        if key not in keys:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = value.strip()
        where[key] = lineno
    parsed = {}
    for key, value in values.items():
        conv = RunConfig._converters.get(key, str)
        try:
            parsed[key] = conv(value)
        except (ConfigError, ValueError) as exc:
            raise ConfigError(f"line {where[key]}: bad value for {key!r}: {exc}") from None
    if "integral" in parsed and parsed.get("model") in INTEGRAL_VARIABLES:
        variables = INTEGRAL_VARIABLES[parsed["model"]]
        if variables is not None:
            try:
                Polynomial.parse(parsed["integral"], variables)
            except ConfigError as exc:
                raise ConfigError(f"line {where['integral']}: {exc}") from None
    return RunConfig.from_mapping(parsed)


# -- named polynomial families ---------------------------------------------------------------


def named_polynomial(text: str, curve: ConvexCurve | None = None, r: float | None = None):
    """``conic a= b=``, ``circle R=``, ``quartic``, ``offset [a= b=] [r=]``, ``disk [r=]`` or polynomial text.

    ``disk`` is the factored integral of the two-sided billiard in the unit disk.
    """
    tokens = text.split()
    head = tokens[0].lower() if tokens else ""
    params = {}
    if head in ("conic", "circle", "quartic", "offset", "disk") and all("=" in t for t in tokens[1:]):
        for t in tokens[1:]:
            k, v = t.split("=", 1)
            params[k] = float(v)
        if head == "conic":
            a, b = params.get("a", 1.0), params.get("b", 1.0)
            return Polynomial.parse(f"{a * a!r}*x^2 + {b * b!r}*y^2 - 1")
        if head == "circle":
            R = params.get("R", 1.0)
            return Polynomial.parse(f"x^2 + y^2 - {R * R!r}")
        if head == "quartic":
            return Polynomial.parse("x^4 + y^4 - 1")
        if head == "offset":
            rr = params.get("r", r)
            if rr is None:
                raise ConfigError("offset family needs r")
            c = ConvexCurve.ellipse(params["a"], params["b"]) if "a" in params else curve
            if c is None:
                raise ConfigError("offset family needs a curve or a= b=")
            return offset_polynomial(c, rr)
        if head == "disk":
            rr = params.get("r", r)
            if rr is None:
                raise ConfigError("disk family needs r")
            return disk_factored_integral(rr).Ft
    return Polynomial.parse(text)


def _default_invariant(curve: ConvexCurve, r: float):
    if curve.kind == "circle" and float(curve.params[0]) == 1.0:
        return disk_integral(r)
    raise ConfigError(f"no default invariant for {curve.spec()}; pass --F")


def _default_factored(curve: ConvexCurve, r: float):
    if curve.kind == "circle" and float(curve.params[0]) == 1.0:
        return disk_factored_integral(r)
    return FactoredIntegral(offset_polynomial(curve, r))


# -- simulations ---------------------------------------------------------------------------------


@dataclass
class SimulationResult:
    model: str
    columns: tuple
    rows: list
    polylines: list = field(default_factory=list)
    values: np.ndarray | None = None
    boundaries: list = field(default_factory=list)


def _boundary(curve: ConvexCurve, n: int = 512):
    return curve.point(np.linspace(0.0, curve.length, n, endpoint=False))


def _larmor_arcs(curve, r, centers, orientations, collisions):
    """One polyline per arc: about centers[k], ending at collisions[k]; the first starts at its entry point."""
    start = larmor_exit(curve, r, centers[0], CW if orientations[0] == CCW else CCW).point
    pieces = []
    for c, o, col in zip(centers, orientations, collisions):
        pieces.append(arc_points(c, r, start, col.point, o))
        start = col.point
    return pieces


def simulate(cfg: RunConfig) -> SimulationResult:
    curve = ConvexCurve.parse(cfg.curve)
    if cfg.model == "birkhoff":
        F = Polynomial.parse(cfg.integral, PHASE) if cfg.integral else None
        trace = orbit(curve, launch(curve, cfg.s0, cfg.eps0), cfg.n)
        rows = list(io.birkhoff_rows(trace, F))
        pts = np.array([c.point for c in trace.collisions])
        vals = np.array([row[-1] for row in rows])
        return SimulationResult("birkhoff", io.BIRKHOFF_COLUMNS, rows, [pts], vals, [_boundary(curve)])
    if cfg.model == "magnetic":
        r = cfg.larmor_radius
        centers, cols = magnetic_orbit(curve, r, cfg.c0, cfg.n)
        rows = list(io.magnetic_rows(centers, cols))
        arcs = _larmor_arcs(curve, r, centers, [CCW] * len(cols), cols)
        return SimulationResult("magnetic", io.MAGNETIC_COLUMNS, rows, arcs, None, [_boundary(curve)])
    if cfg.model == "twosided":
        r = cfg.larmor_radius
        F = Polynomial.parse(cfg.integral) if cfg.integral else None
        c0 = SidedCenter(cfg.c0, cfg.side)
        cols = twosided_orbit(curve, r, c0, cfg.n)
        rows = list(io.twosided_rows(c0, cols, F))
        centers = [c0] + [c.after for c in cols[:-1]]
        arcs = _larmor_arcs(curve, r, [c.point for c in centers], [c.orientation for c in centers], cols)
        vals = np.array([row[-1] for row in rows]) if F is not None else None
        return SimulationResult("twosided", io.TWOSIDED_COLUMNS, rows, arcs, vals, [_boundary(curve)])
    # angular billiard outside the given curve, with equal angles at the pole
    frame = DualityFrame(tuple(cfg.pole))
    Gamma = curve
    if Gamma.indicator(*cfg.pole) >= 0:
        raise ConfigError(f"pole {cfg.pole} must lie inside {cfg.curve}")
    if cfg.integral:
        model = transport_integral(Polynomial.parse(cfg.integral, SIGMA_V), pole=cfg.pole)
    elif curve.kind == "ellipse":
        model = ellipse_angular_integral(*map(float, curve.params[:2]), pole=cfg.pole)
    else:
        model = None
    pts = angular_orbit(Gamma, frame, cfg.a0, cfg.n)
    rows = list(io.angular_rows(pts, model))
    vals = np.array([row[-1] for row in rows]) if model is not None else None
    return SimulationResult("angular", io.ANGULAR_COLUMNS, rows, [pts], vals, [_boundary(Gamma)])


def render_svg(result: SimulationResult, path, offsets=()):
    scene = Scene()
    for b in result.boundaries:
        scene.add(b, width=1.5, closed=True)
    for curve, d in offsets:
        scene.add_offset(curve, d)
    for p in result.polylines:
        scene.add(p, stroke="steelblue", width=0.6)
    return scene.write(path)


# -- checks ------------------------------------------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    residual: float
    tol: float
    detail: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.residual < self.tol)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"CHECK {self.name} residual={self.residual:.6g} tol={self.tol:.6g} {status}"


def _curve_r(args, need_r=True):
    if args.curve is None:
        raise ConfigError("--curve is required for this check")
    curve = ConvexCurve.parse(args.curve)
    if args.beta is not None and args.r is not None:
        raise ConfigError("exactly one of beta/r must be given")
    r = args.r if args.r is not None else (1.0 / args.beta if args.beta is not None else None)
    if need_r and r is None:
        raise ConfigError("exactly one of beta/r must be given")
    return curve, r


def _check_integral(args):
    model = args.model or "birkhoff"
    curve, r = _curve_r(args, need_r=model == "twosided")
    n = args.n if args.n is not None else 10_000
    if model == "birkhoff":
        if args.integral:
            F = Polynomial.parse(args.integral, PHASE)
        elif curve.kind == "circle":
            F = circle_integral()
        elif curve.kind == "ellipse":
            F = ellipse_integral(*map(float, curve.params[:2]))
        else:
            raise ConfigError("pass --integral for this curve")
        res = integral_deviation(orbit(curve, launch(curve, args.s0, args.eps0), n), F)
        return CheckResult("integral", res, 1e-9, {"steps": n})
    if model == "twosided":
        F = named_polynomial(args.integral, curve, r) if args.integral else _default_invariant(curve, r)
        c0 = SidedCenter(_pair(args.c0) if args.c0 else (r, 0.0), args.side)
        return CheckResult("integral", orbit_invariance_deviation(curve, r, F, c0, n), 1e-9, {"steps": n})
    if model == "angular":
        pole = _pair(args.pole) if args.pole else (0.0, 0.0)
        if args.integral:
            mdl = transport_integral(Polynomial.parse(args.integral, SIGMA_V), pole=pole)
        elif curve.kind == "ellipse":
            mdl = ellipse_angular_integral(*map(float, curve.params[:2]), pole=pole)
        else:
            raise ConfigError("pass --integral for this curve")
        a0 = _pair(args.a0) if args.a0 else (3.0, 0.2)
        pts = angular_orbit(curve, DualityFrame(pole), a0, n)
        G = mdl.G(pts[:, 0], pts[:, 1])
        res = float(np.max(np.abs(G - G[0])) / max(1.0, abs(G[0])))
        return CheckResult("integral", res, 1e-8, {"steps": n, "trivial": mdl.trivial})
    raise ConfigError(f"check integral does not support model {model!r}")


def _require_f(args):
    if not args.f:
        raise ConfigError("--f is required for this check")
    return named_polynomial(args.f)


def _check_identity1(args):
    f = _require_f(args)
    m = args.m if args.m is not None else 1
    if args.point:
        pt = _pair(args.point)
    else:
        pts = radial_samples(f, 16)
        pt = pts[3]
    eps_values = [float(e) for e in (args.eps or "1e-2,1e-3").split(",")]
    res = max(shift_equation_residual(f, m, pt, e) for e in eps_values)
    return CheckResult("identity1", res, 1e-9, {"point": tuple(map(float, pt)), "eps": eps_values})


def _check_identity2(args):
    f = _require_f(args)
    g = named_polynomial(args.g) if args.g else Polynomial.constant(1)
    m = args.m if args.m is not None else 1
    mean, spread = hessian_power_residual(f, g, m, radial_samples(f))
    return CheckResult("identity2", spread, 1e-10, {"c1": mean})


def _check_identity22(args):
    curve, r = _curve_r(args)
    Ft = named_polynomial(args.f, curve, r) if args.f else _default_factored(curve, r)
    rep = cubic_gradient_constancy(Ft, curve, r)
    return CheckResult("identity22", rep.spread, 1e-10, {"C": rep.C, "skipped": rep.skipped})


def _random_centers(curve, r, n, seed, margin=1e-3):
    return CenterAnnulus(curve, r).sample(np.random.default_rng(seed), n, margin=margin)


def _check_pair(args):
    curve, r = _curve_r(args)
    if not (args.f1 and args.f2):
        raise ConfigError("--f1 and --f2 are required")
    phase = any(re.search(r"\bv(1|2|x|y)\b", t) for t in (args.f1, args.f2))
    variables = PHASE if phase else XY
    pair = IntegralPair(Polynomial.parse(args.f1, variables), Polynomial.parse(args.f2, variables))
    rep = check_integral_pair(curve, r, pair, _random_centers(curve, r, args.samples, args.seed))
    return CheckResult("pair", max(rep.condition1, rep.condition2), 1e-10,
                       {"condition1": rep.condition1, "condition2": rep.condition2, "degenerate": rep.degenerate})


def _invariant_arg(args, curve, r):
    return named_polynomial(args.F, curve, r) if args.F else _default_invariant(curve, r)


def _check_boundary(args):
    curve, r = _curve_r(args)
    rep = boundary_constancy_residual(_invariant_arg(args, curve, r), curve, r)
    return CheckResult("boundary", max(rep.spread_inner, rep.spread_outer, rep.gap), 1e-12,
                       {"c": rep.c, "spread_inner": rep.spread_inner, "spread_outer": rep.spread_outer, "gap": rep.gap})


def _check_remarkable(args):
    curve, r = _curve_r(args)
    F = _invariant_arg(args, curve, r)
    ss = np.linspace(0.0, curve.length, 64, endpoint=False)
    es = np.linspace(0.0, math.pi / 2, 64)
    res = max(remarkable_residual(F, curve, r, s, e) for s in ss for e in es)
    return CheckResult("remarkable", res, 1e-10, {"grid": "64x64"})


def _check_gradient_ratio(args):
    curve, r = _curve_r(args)
    Ft = named_polynomial(args.F, curve, r) if args.F else _default_factored(curve, r)
    ss = np.linspace(0.0, curve.length, 64, endpoint=False)
    res = max(gradient_ratio_residual(Ft, curve, r, s) for s in ss)
    return CheckResult("gradient-ratio", res, 1e-12)


def _check_offset_poly(args):
    curve, r = _curve_r(args)
    r_model = args.poly_r if args.poly_r is not None else r
    res = offset_vanishing_residual(offset_polynomial(curve, r_model), curve, r)
    return CheckResult("offset-poly", res, 1e-6, {"r_model": r_model})


def _check_symplectic(args):
    curve, r = _curve_r(args)
    # difference quotients degrade near the annulus edge, where M has a square-root singularity
    centers = _random_centers(curve, r, args.samples, args.seed, margin=SYMPLECTIC_MARGIN)
    h = args.h if args.h is not None else 1e-5
    res = max(symplecticity_residual(curve, r, SidedCenter(c, args.side), h) for c in centers)
    tol = 1e-5 if curve.kind == "circle" else 1e-4
    return CheckResult("symplectic", res, tol, {"h": h, "samples": len(centers)})


CHECKS = {
    "integral": _check_integral,
    "identity1": _check_identity1,
    "identity2": _check_identity2,
    "identity22": _check_identity22,
    "pair": _check_pair,
    "boundary": _check_boundary,
    "remarkable": _check_remarkable,
    "gradient-ratio": _check_gradient_ratio,
    "offset-poly": _check_offset_poly,
    "symplectic": _check_symplectic,
}


def run_check(args) -> CheckResult:
    res = CHECKS[args.name](args)
    if args.tol is not None:
        res = replace(res, tol=args.tol)
    return res


# -- argument parsing ------------------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _add_field_args(p):
    p.add_argument("--curve")
    p.add_argument("--r", type=float)
    p.add_argument("--beta", type=float)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--verbose", "-v", action="store_true")
    parser = _Parser(prog="blab", description="Billiard integrability lab.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    _add = sub.add_parser
    sub.add_parser = lambda *a, **k: _add(*a, parents=[common], **k)

    sim = sub.add_parser("simulate", help="run an orbit and write its trace CSV")
    sim.add_argument("model", choices=MODELS)
    sim.add_argument("--config")
    _add_field_args(sim)
    sim.add_argument("--s0", type=float)
    sim.add_argument("--eps0", type=float)
    sim.add_argument("--c0")
    sim.add_argument("--side", type=int)
    sim.add_argument("--a0")
    sim.add_argument("--pole")
    sim.add_argument("-n", type=int)
    sim.add_argument("--integral")
    sim.add_argument("--out")
    sim.add_argument("--svg")
    sim.add_argument("--figure")
    sim.add_argument("--report", action="store_true", help="render a PNG figure next to the CSV")
    sim.add_argument("--tol", type=float, help="also check the attached integral along the trace")

    chk = sub.add_parser("check", help="evaluate a residual and print a CHECK line")
    chk.add_argument("name", choices=sorted(CHECKS))
    _add_field_args(chk)
    chk.add_argument("--model")
    chk.add_argument("--integral")
    chk.add_argument("--f")
    chk.add_argument("--g")
    chk.add_argument("--m", type=int)
    chk.add_argument("--F")
    chk.add_argument("--f1")
    chk.add_argument("--f2")
    chk.add_argument("--point")
    chk.add_argument("--eps")
    chk.add_argument("--s0", type=float, default=0.0)
    chk.add_argument("--eps0", type=float, default=1.0)
    chk.add_argument("--c0")
    chk.add_argument("--a0")
    chk.add_argument("--pole")
    chk.add_argument("--side", type=int, default=1)
    chk.add_argument("-n", type=int)
    chk.add_argument("--samples", type=int, default=100)
    chk.add_argument("--seed", type=int, default=0)
    chk.add_argument("--h", type=float)
    chk.add_argument("--poly-r", type=float)
    chk.add_argument("--tol", type=float)

    sing = sub.add_parser("singular", help="locate singular points of f and estimate branch indices")
    sing.add_argument("--f", required=True)
    sing.add_argument("--box", default="-3,3,-3,3")
    _add_field_args(sing)

    cus = sub.add_parser("cusps", help="cusps of the inner offset of a curve")
    _add_field_args(cus)

    ver = sub.add_parser("verdict", help="search offset singularities for sub-quadratic branches")
    _add_field_args(ver)

    exp = sub.add_parser("export", help="render curves and an orbit")
    exp.add_argument("format", choices=["svg"])
    _add_field_args(exp)
    exp.add_argument("--offsets", action="store_true", help="overlay both offsets at distance r")
    exp.add_argument("--model", choices=MODELS)
    exp.add_argument("--c0")
    exp.add_argument("--side", type=int, default=1)
    exp.add_argument("--s0", type=float, default=0.0)
    exp.add_argument("--eps0", type=float, default=1.0)
    exp.add_argument("--a0")
    exp.add_argument("--pole")
    exp.add_argument("-n", type=int, default=50)
    exp.add_argument("--out", required=True)
    return parser


def _simulate_config(args) -> RunConfig:
    values = {}
    if args.config:
        values = dict(vars(parse_config(args.config)))
    flags = {
        "model": args.model, "curve": args.curve, "beta": args.beta, "r": args.r, "s0": args.s0,
        "eps0": args.eps0, "c0": args.c0, "side": args.side, "a0": args.a0, "pole": args.pole,
        "n": args.n, "integral": args.integral, "out": args.out, "svg": args.svg, "figure": args.figure,
        "tol": args.tol,
    }
    for k, v in flags.items():
        if v is not None:
            values[k] = v
    if args.report:
        values["report"] = True
    if args.config and args.model != values.get("model"):
        values["model"] = args.model
    for k in ("c0", "a0", "pole"):
        if isinstance(values.get(k), str):
            values[k] = _pair(values[k])
    return RunConfig.from_mapping({k: v for k, v in values.items() if v is not None})


def _cmd_simulate(args, out) -> int:
    cfg = _simulate_config(args)
    result = simulate(cfg)
    csv_path = Path(cfg.out) if cfg.out else None
    if csv_path is not None:
        io.write_rows(csv_path, result.columns, result.rows)
        print(f"wrote {csv_path} ({len(result.rows)} rows)", file=out)
    else:
        w = sys.stdout if out is None else out
        print(",".join(result.columns), file=w)
        for row in result.rows:
            print(",".join(io.fmt(v) for v in row), file=w)
    if cfg.svg:
        render_svg(result, cfg.svg)
        print(f"wrote {cfg.svg}", file=out)
    figure = cfg.figure
    if figure is None and cfg.report:
        if csv_path is None:
            raise ConfigError("--report needs --out to place the figure next to the CSV")
        figure = csv_path.with_suffix(".png")
    if figure:
        from .plotting import report_figure

        label = {"angular": "G"}.get(result.model, "F")
        report_figure(figure, result.polylines, result.values, label, f"{result.model} on {cfg.curve}",
                      result.boundaries)
        print(f"wrote {figure}", file=out)
    if result.values is not None and cfg.tol is not None:
        v = result.values[np.isfinite(result.values)]
        dev = float(np.max(np.abs(v - v[0])) / max(1.0, abs(v[0])))
        ok = dev < cfg.tol
        print(f"CHECK trace-integral residual={dev:.6g} tol={cfg.tol:.6g} {'PASS' if ok else 'FAIL'}", file=out)
        return EXIT_OK if ok else EXIT_FAIL
    return EXIT_OK


def _cmd_check(args, out) -> int:
    res = run_check(args)
    print(res.line(), file=out)
    if args.verbose:
        for k, v in res.detail.items():
            print(f"  {k} = {v}", file=out)
    return EXIT_OK if res.passed else EXIT_FAIL


def _print_branches(branches, out, indent="  "):
    for b in branches:
        lo, hi = b.index_ci
        print(f"{indent}BRANCH index={b.puiseux_index:.6g} ci=[{lo:.6g},{hi:.6g}] "
              f"a={b.order_a:.4g} b={b.order_b:.4g} samples={b.samples_used}", file=out)


def _cmd_singular(args, out) -> int:
    curve = ConvexCurve.parse(args.curve) if args.curve else None
    f = named_polynomial(args.f, curve, args.r)
    box = [float(v) for v in args.box.split(",")]
    if len(box) != 4:
        raise ConfigError("--box needs xmin,xmax,ymin,ymax")
    pts = find_singular_points(f, box)
    print(f"SINGULAR count={len(pts)}", file=out)
    for p in pts:
        print(f"POINT x={p[0]:.12g} y={p[1]:.12g}", file=out)
        _print_branches(estimate_branch(f, p, aux=f), out)
    return EXIT_OK


def _cmd_cusps(args, out) -> int:
    curve, r = _curve_r(args)
    cusps = find_cusps(curve, r)
    print(f"CUSPS count={len(cusps)}", file=out)
    try:
        poly = offset_polynomial(curve, r)
    except ConfigError:
        poly = None
    for c in cusps:
        print(f"CUSP s={c.s:.12g} x={c.point[0]:.12g} y={c.point[1]:.12g}", file=out)
        if poly is not None and args.verbose:
            _print_branches(estimate_branch(poly, tuple(c.point), aux=poly), out)
    return EXIT_OK


def _cmd_verdict(args, out) -> int:
    curve, r = _curve_r(args)
    v = subquadratic_verdict(curve, r)
    for p in v.points:
        print(f"POINT x={p[0]:.12g} y={p[1]:.12g}", file=out)
        _print_branches(v.branches[p], out)
    text = "NOT ALGEBRAICALLY INTEGRABLE" if v.verdict == VERDICT_NEGATIVE else "NO OBSTRUCTION FOUND"
    print(f"VERDICT {text}", file=out)
    return EXIT_OK


def _cmd_export(args, out) -> int:
    curve, r = _curve_r(args, need_r=args.offsets or args.model in ("magnetic", "twosided"))
    if args.model:
        values = {"model": args.model, "curve": args.curve, "r": r, "n": args.n, "side": args.side,
                  "s0": args.s0, "eps0": args.eps0}
        for k in ("c0", "a0", "pole"):
            if getattr(args, k):
                values[k] = _pair(getattr(args, k))
        result = simulate(RunConfig.from_mapping(values))
    else:
        result = SimulationResult("none", (), [], [], None, [_boundary(curve)])
    offsets = [(curve, r), (curve, -r)] if args.offsets else []
    path = render_svg(result, args.out, offsets)
    print(f"wrote {path}", file=out)
    return EXIT_OK


COMMANDS = {
    "simulate": _cmd_simulate,
    "check": _cmd_check,
    "singular": _cmd_singular,
    "cusps": _cmd_cusps,
    "verdict": _cmd_verdict,
    "export": _cmd_export,
}


def main(argv=None, out=None) -> int:
    out = out if out is not None else sys.stdout
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args, out)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, ArithmeticError, BlabError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
