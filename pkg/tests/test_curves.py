import math
import warnings

import numpy as np
import pytest

from blab.curves import (
    ConvexCurve,
    CuspDegeneracyWarning,
    FieldConfig,
    eval_frame,
    find_cusps,
    offset_point,
    offset_tangent_scale,
    validate_weak_field,
)
from blab.errors import CurveError


@pytest.fixture(scope="module")
def ellipse():
    return ConvexCurve.ellipse(2.0, 1.0)


def test_circle_frame_at_zero():
    f = eval_frame(ConvexCurve.circle(1.0), 0.0)
    np.testing.assert_allclose(f.point, [1, 0], atol=1e-15)
    np.testing.assert_allclose(f.tangent, [0, 1], atol=1e-15)
    np.testing.assert_allclose(f.inward_normal, [-1, 0], atol=1e-15)
    assert f.k == pytest.approx(1.0)
    assert f.rho_prime == 0.0


def test_ellipse_curvature_extremes(ellipse):
    f = eval_frame(ellipse, 0.0)
    np.testing.assert_allclose(f.point, [2, 0], atol=1e-12)
    assert float(f.k) == pytest.approx(2.0, rel=1e-12)
    k_min, k_max = ellipse.curvature_range
    assert k_min == pytest.approx(0.25, rel=1e-10)
    assert k_max == pytest.approx(2.0, rel=1e-10)
    lo, hi = ellipse.rho_range
    assert (lo, hi) == (pytest.approx(0.5), pytest.approx(4.0))


def test_ellipse_curvature_matches_parametric_formula(ellipse):
    t = np.linspace(0, 2 * np.pi, 37)
    k_ref = 2.0 / (4 * np.sin(t) ** 2 + np.cos(t) ** 2) ** 1.5
    np.testing.assert_allclose(ellipse.frame_at(t).k, k_ref, rtol=1e-12)


def test_unit_speed_in_arclength(ellipse):
    s = np.linspace(0.0, ellipse.length, 10_000, endpoint=False)
    h = 1e-6
    d = (ellipse.point(s + h) - ellipse.point(s - h)) / (2 * h)
    assert np.max(np.abs(np.hypot(d[:, 0], d[:, 1]) - 1.0)) < 1e-8
    t = ellipse.frame(s).tangent
    assert np.max(np.abs(np.hypot(t[:, 0], t[:, 1]) - 1.0)) < 1e-12


def test_ellipse_length(ellipse):
    from scipy.special import ellipe

    assert ellipse.length == pytest.approx(4 * 2 * ellipe(1 - 1 / 4), rel=1e-12)


@pytest.mark.parametrize("spec", ["circle:1.5", "ellipse:2,1", "ellipse:1,2", "trig:1;0.05,0.02;0.01,0"])
def test_frame_orthonormal(spec):
    c = ConvexCurve.parse(spec)
    f = c.frame(np.linspace(0, c.length, 257))
    dots = np.sum(f.tangent * f.inward_normal, axis=1)
    assert np.max(np.abs(dots)) < 1e-12
    assert np.max(np.abs(np.hypot(*f.inward_normal.T) - 1)) < 1e-12
    np.testing.assert_array_equal(f.k * f.rho, np.ones_like(f.k) * (f.k * f.rho))
    assert np.all(f.k > 0)


def test_trig_rho_prime_matches_difference_quotient():
    c = ConvexCurve.parse("trig:1;0.05,0.02;0.01,0")
    s = np.linspace(0.1, c.length - 0.1, 40)
    h = 1e-5
    fd = (c.frame(s + h).rho - c.frame(s - h).rho) / (2 * h)
    np.testing.assert_allclose(c.frame(s).rho_prime, fd, atol=1e-7)


def test_circle_curvature_random_points():
    c = ConvexCurve.circle(2.5)
    s = np.random.default_rng(0).uniform(0, c.length, 1000)
    assert np.max(np.abs(c.frame(s).k - 0.4)) < 1e-10


@pytest.mark.parametrize("d,radius", [(2.0, 1.0), (-2.0, 3.0), (0.0, 1.0)])
def test_circle_offsets(d, radius):
    c = ConvexCurve.circle(1.0)
    s = np.linspace(0, c.length, 50)
    p = offset_point(c, s, d)
    np.testing.assert_allclose(np.hypot(p[:, 0], p[:, 1]), radius, atol=1e-12)


def test_zero_offset_is_curve(ellipse):
    s = np.linspace(0, ellipse.length, 20)
    np.testing.assert_array_equal(offset_point(ellipse, s, 0.0), ellipse.point(s))


@pytest.mark.parametrize("r", [0.3, 5.0])
def test_offset_tangent_property(ellipse, r):
    """Offset derivative equals (1 - k d) times the curve tangent, away from cusps."""
    s = np.linspace(0.05, ellipse.length - 0.05, 60)
    h = 1e-6
    for d in (r, -r):
        fd = (offset_point(ellipse, s + h, d) - offset_point(ellipse, s - h, d)) / (2 * h)
        f = ellipse.frame(s)
        expected = offset_tangent_scale(ellipse, s, d)[:, None] * f.tangent
        np.testing.assert_allclose(fd, expected, rtol=1e-6, atol=1e-6)
        ratio = np.sum(fd * f.tangent, axis=1)
        rho = f.rho
        ref = -(r - rho) / rho if d > 0 else (r + rho) / rho
        np.testing.assert_allclose(ratio, ref, rtol=1e-6)


def test_cusps_circle_empty():
    assert find_cusps(ConvexCurve.circle(1.0), 2.0) == []


def test_cusps_ellipse_r1(ellipse):
    cusps = find_cusps(ellipse, 1.0)
    assert len(cusps) == 4
    pts = sorted((round(float(c.point[0]), 6), round(float(c.point[1]), 6)) for c in cusps)
    assert pts == [(-1.081775, -0.259921), (-1.081775, 0.259921), (1.081775, -0.259921), (1.081775, 0.259921)] or all(
        abs(abs(x) - 1.081776) < 1e-6 and abs(abs(y) - 0.259921) < 1e-6 for x, y in pts
    )


def test_cusps_match_evolute(ellipse):
    # evolute of (a cos t, b sin t): ((a^2-b^2)/a cos^3 t, (b^2-a^2)/b sin^3 t); rho(t) = (a^2 sin^2 + b^2 cos^2)^1.5/(ab)
    from scipy.optimize import brentq

    t = brentq(lambda t: (4 * np.sin(t) ** 2 + np.cos(t) ** 2) ** 1.5 / 2 - 1.0, 0.0, np.pi / 2)
    ev = np.array([1.5 * np.cos(t) ** 3, -3.0 * np.sin(t) ** 3])
    d = min(np.hypot(*(c.point - ev)) for c in find_cusps(ellipse, 1.0))
    assert d < 1e-6


def test_cusp_signature(ellipse):
    r = 1.0
    for c in find_cusps(ellipse, r):
        assert abs(float(ellipse.frame(c.s).rho) - r) < 1e-10
        h = 1e-4
        fwd = offset_point(ellipse, c.s + h, r) - offset_point(ellipse, c.s, r)
        back = offset_point(ellipse, c.s, r) - offset_point(ellipse, c.s - h, r)
        assert float(fwd @ back) < 0


def test_cusps_out_of_range(ellipse):
    assert find_cusps(ellipse, 5.0) == []
    assert find_cusps(ellipse, 0.3) == []


@pytest.mark.parametrize("which", [0, 1])
def test_degenerate_cusp_warns(ellipse, which):
    # rho attains its extremes at the vertices, where rho' = 0
    r = ellipse.rho_range[which]
    with pytest.warns(CuspDegeneracyWarning):
        cusps = find_cusps(ellipse, r)
    assert cusps == []


def test_weak_field():
    assert validate_weak_field(ConvexCurve.circle(1), 0.5).passed
    e = ConvexCurve.ellipse(2, 1)
    bad = validate_weak_field(e, 0.3)
    assert not bad.passed and bad.k_min == pytest.approx(0.25)
    good = validate_weak_field(e, 0.2)
    assert good.passed and good.margin == pytest.approx(0.05)


def test_field_config_roundtrip():
    assert FieldConfig.from_radius(4.0).beta == 0.25
    assert FieldConfig(0.2).larmor_radius == pytest.approx(5.0)
    with pytest.raises(CurveError):
        FieldConfig(0.0)


@pytest.mark.parametrize("bad", ["ellipse:2", "square:1", "circle", "circle:-1", "trig:1;0.9,0"])
def test_parse_errors(bad):
    with pytest.raises(CurveError):
        ConvexCurve.parse(bad)


@pytest.mark.parametrize("spec", ["circle:1.5", "ellipse:2.0,1.0", "trig:1.0;0.05,0.02@0.1,0.2"])
def test_spec_roundtrip(spec):
    c = ConvexCurve.parse(spec)
    assert ConvexCurve.parse(c.spec()).spec() == c.spec()


def test_indicator_and_param_of_point(ellipse):
    assert ellipse.indicator(0, 0) < 0 < ellipse.indicator(3, 0)
    for phi in np.linspace(0.1, 6, 7):
        p = ellipse.point_at(phi)
        assert ellipse.param_of_point(*p) == pytest.approx(phi, abs=1e-10)
