import io as stdio
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from blab import io
from blab.algebra.polynomial import PHASE, XY, Polynomial
from blab.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_NUMERIC, EXIT_OK, RunConfig, main, named_polynomial, parse_config
from blab.curves import ConvexCurve
from blab.errors import ConfigError
from blab.svg import ARC_SEGMENTS, BOUNDARY_SEGMENTS, Scene, arc_points, export_svg

SVG_NS = "{http://www.w3.org/2000/svg}"


def run(*argv):
    out = stdio.StringIO()
    code = main(list(argv), out=out)
    return code, out.getvalue()


def _svg_shapes(path):
    root = ET.parse(path).getroot()
    assert root.tag == SVG_NS + "svg"
    return root.findall(SVG_NS + "polygon"), root.findall(SVG_NS + "polyline")


# -- documented usage ---------------------------------------------------------------


def test_simulate_twosided_disk(tmp_path):
    out = tmp_path / "t.csv"
    code, _ = run("simulate", "twosided", "--curve", "circle:1", "--r", "2", "--c0", "2,0", "--side", "1",
                  "-n", "1000", "--integral", "(x^2+y^2-5)^2-16", "--out", str(out))
    assert code == EXIT_OK
    data = io.read_trace(out)
    assert list(data) == list(io.TWOSIDED_COLUMNS)
    assert len(data["F"]) == 1001
    assert np.max(np.abs(data["F"] + 15)) < 1e-9
    assert set(data["side"][1:]) == {1.0, 2.0}


def test_verdict_ellipse():
    code, text = run("verdict", "--curve", "ellipse:2,1", "--r", "1")
    assert code == EXIT_OK
    assert "POINT x=1.08177" in text
    assert text.strip().splitlines()[-1] == "VERDICT NOT ALGEBRAICALLY INTEGRABLE"


def test_verdict_circle():
    code, text = run("verdict", "--curve", "circle:1", "--r", "2")
    assert code == EXIT_OK
    assert text.strip() == "VERDICT NO OBSTRUCTION FOUND"


def test_check_identity2_conic():
    code, text = run("check", "identity2", "--f", "conic a=2 b=1", "--g", "1", "--m", "1", "-v")
    assert code == EXIT_OK
    line = text.splitlines()[0]
    assert line.startswith("CHECK identity2 residual=") and line.endswith("tol=1e-10 PASS")
    c1 = float(text.split("c1 = ")[1].split()[0])
    assert c1 == pytest.approx(32.0, rel=1e-8)


# -- check subcommands ---------------------------------------------------------------


@pytest.mark.parametrize(
    "argv",
    [
        ["integral", "--curve", "ellipse:2,1", "-n", "2000"],
        ["integral", "--model", "angular", "--curve", "ellipse:0.5,1", "--a0", "3,0.7", "--pole", "0.1,0.05", "-n", "200"],
        ["integral", "--model", "twosided", "--curve", "circle:1", "--r", "2", "-n", "500"],
        ["identity1", "--f", "conic a=2 b=1"],
        ["identity22", "--curve", "circle:1", "--r", "2"],
        ["pair", "--curve", "circle:1", "--r", "2", "--f1", "x^2+y^2", "--f2", "10-x^2-y^2"],
        ["boundary", "--curve", "circle:1", "--r", "2"],
        ["remarkable", "--curve", "circle:1", "--r", "2"],
        ["gradient-ratio", "--curve", "circle:1", "--r", "2"],
        ["offset-poly", "--curve", "ellipse:2,1", "--r", "1"],
        ["symplectic", "--curve", "circle:1", "--r", "2", "--samples", "20"],
        ["symplectic", "--curve", "ellipse:2,1", "--r", "5", "--samples", "20"],
    ],
)
def test_checks_pass(argv):
    code, text = run("check", *argv)
    assert code == EXIT_OK, text
    assert text.startswith(f"CHECK {argv[0]} residual=") and text.rstrip().endswith("PASS")


@pytest.mark.parametrize(
    "argv",
    [
        ["identity2", "--f", "quartic", "--m", "2"],
        ["identity22", "--curve", "ellipse:2,1", "--r", "1", "--f", "offset"],
        ["offset-poly", "--curve", "ellipse:2,1", "--r", "0.7", "--poly-r", "1"],
        ["integral", "--curve", "ellipse:2,1", "--integral", "v1", "-n", "200"],
    ],
)
def test_rejection_fixtures_fail(argv):
    code, text = run("check", *argv)
    assert code == EXIT_FAIL
    assert text.rstrip().endswith("FAIL")


def test_tol_override_is_echoed():
    code, text = run("check", "boundary", "--curve", "circle:1", "--r", "2", "--tol", "1e-20")
    assert code == EXIT_FAIL
    assert "tol=1e-20 FAIL" in text


def test_check_thresholds_match_module_tolerances():
    expected = {
        ("integral", "--curve", "circle:1", "-n", "100"): 1e-9,
        ("identity1", "--f", "conic a=2 b=1"): 1e-9,
        ("identity2", "--f", "conic a=2 b=1"): 1e-10,
        ("boundary", "--curve", "circle:1", "--r", "2"): 1e-12,
        ("remarkable", "--curve", "circle:1", "--r", "2"): 1e-10,
        ("gradient-ratio", "--curve", "circle:1", "--r", "2"): 1e-12,
        ("offset-poly", "--curve", "ellipse:2,1", "--r", "1"): 1e-6,
    }
    for argv, tol in expected.items():
        _, text = run("check", *argv)
        assert float(text.split("tol=")[1].split()[0]) == tol


# -- exit codes and errors ------------------------------------------------------------


def test_config_error_exit(capsys):
    code, _ = run("check", "boundary", "--curve", "square:1", "--r", "2")
    assert code == EXIT_CONFIG
    assert "error:" in capsys.readouterr().err


def test_both_beta_and_r(capsys):
    code, _ = run("simulate", "twosided", "--curve", "circle:1", "--r", "2", "--beta", "0.5", "--c0", "2,0")
    assert code == EXIT_CONFIG
    assert "exactly one of beta/r" in capsys.readouterr().err


def test_numerical_failure_exit(capsys):
    # the center lies outside the annulus, so the Larmor circle misses the boundary
    code, _ = run("simulate", "magnetic", "--curve", "circle:1", "--r", "2", "--c0", "3.5,0", "-n", "3")
    assert code == EXIT_NUMERIC
    assert "numerical failure" in capsys.readouterr().err


def test_unknown_subcommand():
    code, _ = run("frobnicate")
    assert code == EXIT_CONFIG


def test_verdict_without_offset_model():
    code, _ = run("verdict", "--curve", "trig:1;0.05,0.02", "--r", "2")
    assert code == EXIT_CONFIG


def test_verbose_after_subcommand():
    code, text = run("check", "boundary", "--curve", "circle:1", "--r", "2", "--verbose")
    assert code == EXIT_OK
    assert len(text.splitlines()) > 1


# -- config files ---------------------------------------------------------------------


def test_minimal_twosided_config(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# two-sided disk\nmodel = twosided\ncurve = circle:1\nr = 2\nc0 = 2, 0\n")
    cfg = parse_config(p)
    assert cfg.n == 1000
    assert cfg.c0 == (2.0, 0.0)
    assert cfg.larmor_radius == 2.0


def test_beta_derives_radius():
    cfg = parse_config(stdio.StringIO("model = magnetic\ncurve = circle:1\nbeta = 0.25\nc0 = 4,0\n"))
    assert cfg.larmor_radius == 4.0


def test_config_both_beta_and_r():
    with pytest.raises(ConfigError, match="exactly one of beta/r"):
        parse_config(stdio.StringIO("model = twosided\ncurve = circle:1\nr = 2\nbeta = 0.5\nc0 = 2,0\n"))


def test_config_bad_polynomial_names_token():
    text = "model = twosided\ncurve = circle:1\nr = 2\nc0 = 2,0\nintegral = x^2 + $y\n"
    with pytest.raises(ConfigError) as exc:
        parse_config(stdio.StringIO(text))
    assert "line 5" in str(exc.value) and "'$'" in str(exc.value)


@pytest.mark.parametrize(
    "text,needle",
    [
        ("model = birkhoff\ncurve = circle:1\ncolour = red\n", "line 3: unknown key"),
        ("model = birkhoff\nmodel = angular\n", "line 2: duplicate key"),
        ("model = birkhoff\ncurve circle:1\n", "line 2: expected"),
        ("model = birkhoff\ncurve = circle:1\nn = many\n", "line 3: bad value"),
        ("curve = circle:1\n", "missing required key 'model'"),
        ("model = angular\ncurve = circle:1\n", "needs an initial point"),
    ],
)
def test_config_errors(text, needle):
    with pytest.raises(ConfigError) as exc:
        parse_config(stdio.StringIO(text))
    assert needle in str(exc.value)


def test_simulate_from_config(tmp_path):
    cfg = tmp_path / "run.cfg"
    out = tmp_path / "b.csv"
    cfg.write_text(f"model = birkhoff\ncurve = ellipse:2,1\nn = 50\nout = {out}\n")
    code, _ = run("simulate", "birkhoff", "--config", str(cfg))
    assert code == EXIT_OK
    assert len(io.read_trace(out)["step"]) == 51


def test_named_polynomials():
    assert named_polynomial("conic a=2 b=1") == Polynomial.parse("4*x^2 + y^2 - 1")
    assert named_polynomial("circle R=3") == Polynomial.parse("x^2 + y^2 - 9")
    assert named_polynomial("x*y - 1") == Polynomial.parse("x*y - 1")
    with pytest.raises(ConfigError):
        named_polynomial("x^2 + $")


# -- CSV traces -----------------------------------------------------------------------


def test_birkhoff_csv_round_trip(tmp_path):
    out = tmp_path / "b.csv"
    code, _ = run("simulate", "birkhoff", "--curve", "ellipse:2,1", "--s0", "0.3", "--eps0", "1.1", "-n", "200",
                  "--integral", "v1^2 + 4*v2^2 - (x*v2 - y*v1)^2", "--out", str(out))
    assert code == EXIT_OK
    header = out.read_text().splitlines()[0]
    assert header == "step,s,x,y,vx,vy,eps,F"
    data = io.read_trace(out)
    F = Polynomial.parse("v1^2 + 4*v2^2 - (x*v2 - y*v1)^2", PHASE)
    recomputed = F(data["x"], data["y"], data["vx"], data["vy"])
    # re-evaluating from the printed state reproduces the printed F
    assert [io.fmt(v) for v in recomputed] == [io.fmt(v) for v in data["F"]]


def test_twosided_csv_round_trip(tmp_path):
    out = tmp_path / "t.csv"
    run("simulate", "twosided", "--curve", "circle:1", "--r", "2", "--c0", "2,0", "-n", "100",
        "--integral", "(x^2+y^2-5)^2-16", "--out", str(out))
    data = io.read_trace(out)
    F = Polynomial.parse("(x^2+y^2-5)^2-16", XY)
    assert [io.fmt(v) for v in F(data["cx"], data["cy"])] == [io.fmt(v) for v in data["F"]]
    assert math.isnan(data["z_s"][0]) and math.isnan(data["eps"][0])


def test_magnetic_csv(tmp_path):
    out = tmp_path / "m.csv"
    code, _ = run("simulate", "magnetic", "--curve", "circle:1", "--r", "2", "--c0", "2,0", "-n", "20", "--out", str(out))
    assert code == EXIT_OK
    data = io.read_trace(out)
    assert list(data) == list(io.MAGNETIC_COLUMNS)
    assert data["step"][0] == 1
    np.testing.assert_allclose(np.hypot(data["cx"], data["cy"]), 2.0, atol=1e-12)
    np.testing.assert_allclose([data["cx"][0], data["cy"][0]], [-1.75, -math.sqrt(15) / 4], atol=1e-12)


def test_angular_csv(tmp_path):
    out = tmp_path / "a.csv"
    code, _ = run("simulate", "angular", "--curve", "ellipse:0.5,1", "--a0", "3,0.7", "-n", "100", "--out", str(out))
    assert code == EXIT_OK
    data = io.read_trace(out)
    assert list(data) == list(io.ANGULAR_COLUMNS)
    assert np.ptp(data["G"]) < 1e-10


def test_csv_to_stdout():
    code, text = run("simulate", "birkhoff", "--curve", "circle:1", "-n", "3")
    assert code == EXIT_OK
    lines = text.strip().splitlines()
    assert lines[0] == ",".join(io.BIRKHOFF_COLUMNS)
    assert len(lines) == 5


def test_fmt_precision():
    assert io.fmt(0.1) == "0.10000000000000001"
    assert float(io.fmt(math.pi)) == math.pi
    assert io.fmt(np.int64(3)) == "3"


def test_write_rows_reports_path(tmp_path):
    bad = tmp_path / "missing" / "t.csv"
    with pytest.raises(OSError, match="missing"):
        io.write_rows(bad, ("a",), [(1,)])


def test_simulate_trace_check_line(tmp_path):
    code, text = run("simulate", "twosided", "--curve", "circle:1", "--r", "2", "--c0", "2,0", "-n", "100",
                     "--integral", "x", "--out", str(tmp_path / "t.csv"), "--tol", "1e-9")
    assert code == EXIT_FAIL
    assert "CHECK trace-integral" in text and text.rstrip().endswith("FAIL")


# -- figures --------------------------------------------------------------------------


def test_report_writes_png(tmp_path):
    out = tmp_path / "t.csv"
    code, _ = run("simulate", "twosided", "--curve", "ellipse:2,1", "--r", "5", "--c0", "4,1", "-n", "40",
                  "--out", str(out), "--report")
    assert code == EXIT_OK
    png = out.with_suffix(".png")
    assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_report_needs_out():
    code, _ = run("simulate", "birkhoff", "--curve", "circle:1", "-n", "3", "--report")
    assert code == EXIT_CONFIG


def test_export_twosided_svg(tmp_path):
    path = tmp_path / "o.svg"
    code, _ = run("export", "svg", "--curve", "circle:1", "--r", "2", "--model", "twosided", "--c0", "2,0",
                  "-n", "50", "--out", str(path))
    assert code == EXIT_OK
    polygons, polylines = _svg_shapes(path)
    assert len(polygons) == 1
    assert len(polygons[0].get("points").split()) == BOUNDARY_SEGMENTS
    assert len(polylines) == 50
    assert all(len(p.get("points").split()) == ARC_SEGMENTS + 1 for p in polylines)


def test_export_boundary_only(tmp_path):
    path = tmp_path / "b.svg"
    code, _ = run("export", "svg", "--curve", "ellipse:2,1", "--out", str(path))
    assert code == EXIT_OK
    polygons, polylines = _svg_shapes(path)
    assert len(polygons) == 1 and polylines == []


def test_export_offsets_show_cusps(tmp_path):
    path = tmp_path / "off.svg"
    code, _ = run("export", "svg", "--curve", "ellipse:2,1", "--r", "1", "--offsets", "--out", str(path))
    assert code == EXIT_OK
    polygons, _ = _svg_shapes(path)
    assert len(polygons) == 3


def test_export_is_deterministic(tmp_path):
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    for p in (a, b):
        run("export", "svg", "--curve", "circle:1", "--r", "2", "--model", "magnetic", "--c0", "2,0", "-n", "5",
            "--out", str(p))
    assert a.read_text() == b.read_text()


def test_svg_viewbox_margin(tmp_path):
    path = export_svg([ConvexCurve.circle(1.0)], [], tmp_path / "c.svg")
    root = ET.parse(path).getroot()
    w = float(root.get("viewBox").split()[2])
    pts = np.array([[float(v) for v in p.split(",")] for p in root.find(SVG_NS + "polygon").get("points").split()])
    # the curve spans 1/1.1 of the box, centered
    assert pts[:, 0].min() == pytest.approx(w * 0.05 / 1.1, rel=1e-3)
    assert pts[:, 0].max() == pytest.approx(w * 1.05 / 1.1, rel=1e-3)


def test_scene_empty():
    text = Scene().to_svg()
    assert text.startswith("<?xml") and "<polyline" not in text and "<polygon" not in text


def test_arc_points_direction():
    ccw = arc_points((0, 0), 1.0, (1, 0), (0, 1), "ccw", n=8)
    cw = arc_points((0, 0), 1.0, (1, 0), (0, 1), "cw", n=8)
    assert ccw[4][1] > 0 and cw[4][1] < 0
    np.testing.assert_allclose(np.hypot(ccw[:, 0], ccw[:, 1]), 1.0)
    np.testing.assert_allclose(cw[-1], [0, 1], atol=1e-12)


def test_run_config_defaults():
    cfg = RunConfig.from_mapping({"model": "birkhoff", "curve": "circle:1"})
    assert (cfg.n, cfg.s0, cfg.eps0, cfg.side) == (1000, 0.0, 1.0, 1)


def test_svg_write_error_names_path(tmp_path):
    bad = tmp_path / "nope" / "x.svg"
    with pytest.raises(OSError, match="nope"):
        Scene().write(bad)
