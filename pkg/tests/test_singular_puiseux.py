import warnings

import numpy as np
import pytest

from blab.algebra.polynomial import Polynomial
from blab.algebra.puiseux import estimate_branch, tangent_directions
from blab.algebra.singular import find_singular_points, refine_singular_point, singular_residual
from blab.algebra.trace import trace_components
from blab.errors import BranchTraceFailed, ConfigError
from blab.magnetic import ellipse_offset_polynomial

P = Polynomial.parse
CUSP = (1.081776, 0.259921)
TWO_OVALS = "y^2 + (x + 2)*(x + 1)*(x - 1)*(x - 2)"


@pytest.fixture(scope="module")
def offset_r1():
    return ellipse_offset_polynomial(2.0, 1.0, 1.0)


def test_canonical_cusp_found():
    pts = find_singular_points(P("y^2 - x^3"), (-1, 1, -1, 1))
    assert len(pts) == 1
    assert np.hypot(*pts[0]) < 1e-9


def test_smooth_circle_has_none():
    assert find_singular_points(P("x^2 + y^2 - 1"), (-2, 2, -2, 2)) == []


def test_node_and_several_points():
    # two crossing circles: two nodes
    f = P("((x - 0.5)^2 + y^2 - 1)*((x + 0.5)^2 + y^2 - 1)")
    pts = find_singular_points(f, (-2, 2, -2, 2))
    assert len(pts) == 2
    for p in pts:
        assert abs(p[0]) < 1e-9 and abs(abs(p[1]) - np.sqrt(0.75)) < 1e-9


def test_offset_polynomial_singular_point(offset_r1):
    pts = find_singular_points(offset_r1, (0, 2, 0, 1))
    assert any(np.hypot(p[0] - CUSP[0], p[1] - CUSP[1]) < 1e-6 for p in pts)
    for p in pts:
        fr, gr = singular_residual(offset_r1, p)
        assert fr < 1e-9 and gr < 1e-9


def test_refine_from_rounded_seed(offset_r1):
    x, y = refine_singular_point(offset_r1, CUSP)
    assert abs(float(y) - (2 ** (1 / 3) - 1)) < 1e-12


def test_two_oval_demo_smooth():
    f = P(TWO_OVALS)
    assert find_singular_points(f, (-3, 3, -2, 2)) == []
    comps = trace_components(f, (-3, 3, -2, 2), step=1e-2)
    closed = [c for c in comps if c.closed]
    assert len(closed) == 2
    centers = sorted(float(c.points[:, 0].mean()) for c in closed)
    assert centers[0] < -1 < 1 < centers[1]
    for c in closed:
        vals = f(c.points[:, 0], c.points[:, 1])
        assert np.max(np.abs(vals)) < 1e-10


@pytest.mark.parametrize("k", [1, 2, 3])
def test_odd_cusp_index(k):
    n = 2 * k + 1
    est = estimate_branch(P(f"y^2 - x^{n}"), (0.0, 0.0))
    assert len(est) == 2
    for b in est:
        assert b.puiseux_index == pytest.approx(n / 2, rel=0.05)
        lo, hi = b.index_ci
        assert lo <= b.puiseux_index <= hi
        assert b.puiseux_index > 1


def test_cusp_index_tolerance():
    for b in estimate_branch(P("y^2 - x^3"), (0.0, 0.0)):
        assert abs(b.puiseux_index - 1.5) < 0.05
    for b in estimate_branch(P("y^2 - x^5"), (0.0, 0.0)):
        assert abs(b.puiseux_index - 2.5) < 0.1


def test_node_branches_are_quadratic():
    est = estimate_branch(P("y^2 - x^2 - x^3"), (0.0, 0.0))
    assert len(est) == 4
    assert all(abs(b.puiseux_index - 2.0) < 0.05 for b in est)
    assert not any(b.sub_quadratic for b in est)


def test_tangent_directions_of_cusp():
    dirs = tangent_directions(P("y^2 - x^3"), 0.0, 0.0)
    assert len(dirs) >= 1
    assert all(abs(np.sin(a)) < 1e-9 for a in dirs)


def test_offset_cusp_branches(offset_r1):
    est = estimate_branch(offset_r1, CUSP, aux=offset_r1)
    assert len(est) == 2
    for b in est:
        assert abs(b.puiseux_index - 1.5) < 0.05
        assert b.sub_quadratic
        # measured orders of H and |grad|^3: a - b has the sign of p/q - 2
        assert np.sign(b.order_a - b.order_b) == np.sign(b.puiseux_index - 2)


def test_nonsingular_point_rejected():
    with pytest.raises(ConfigError):
        estimate_branch(P("x^2 + y^2 - 1"), (1.0, 0.0))


def test_strict_trace_failure_reports_branch():
    # a too-small start radius leaves no sign changes to follow on an isolated point
    f = P("x^2 + y^2")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        est = estimate_branch(f, (0.0, 0.0))
    assert est == []
    with pytest.raises(BranchTraceFailed):
        estimate_branch(P("y^2 - x^3"), (0.0, 0.0), start_radius=1e-7, inner_radius=1e-8, strict=True)
