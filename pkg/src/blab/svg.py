"""Deterministic SVG rendering of boundaries, chords and Larmor arcs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .curves import ConvexCurve, offset_point

BOUNDARY_SEGMENTS = 512
ARC_SEGMENTS = 64
MARGIN = 0.05
CANVAS = 800


@dataclass
class Polyline:
    points: np.ndarray
    stroke: str = "black"
    width: float = 1.0
    closed: bool = False


@dataclass
class Scene:
    items: list = field(default_factory=list)

    def add(self, points, stroke="black", width=1.0, closed=False):
        pts = np.asarray(points, dtype=float)
        if len(pts):
            self.items.append(Polyline(pts, stroke, width, closed))
        return self

    def add_curve(self, curve: ConvexCurve, stroke="black", width=1.5):
        s = np.linspace(0.0, curve.length, BOUNDARY_SEGMENTS, endpoint=False)
        return self.add(curve.point(s), stroke, width, closed=True)

    def add_offset(self, curve: ConvexCurve, d: float, stroke="gray", width=0.8):
        s = np.linspace(0.0, curve.length, BOUNDARY_SEGMENTS, endpoint=False)
        return self.add(offset_point(curve, s, d), stroke, width, closed=True)

    def bounds(self):
        if not self.items:
            return np.array([-1.0, -1.0]), np.array([1.0, 1.0])
        allp = np.vstack([it.points for it in self.items])
        return allp.min(axis=0), allp.max(axis=0)

    def to_svg(self) -> str:
        lo, hi = self.bounds()
        span = np.maximum(hi - lo, 1e-12)
        lo = lo - MARGIN * span
        span = span * (1 + 2 * MARGIN)
        scale = CANVAS / max(span)
        w, h = span * scale

        def xy(p):
            # flip y so that the picture has the mathematical orientation
            return f"{(p[0] - lo[0]) * scale:.3f},{(lo[1] + span[1] - p[1]) * scale:.3f}"

        out = [
            '<?xml version="1.0" encoding="UTF-8"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w:.0f}" height="{h:.0f}" '
            f'viewBox="0 0 {w:.3f} {h:.3f}">',
        ]
        for it in self.items:
            tag = "polygon" if it.closed else "polyline"
            pts = " ".join(xy(p) for p in it.points)
            out.append(f'<{tag} points="{pts}" fill="none" stroke="{it.stroke}" stroke-width="{it.width}"/>')
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def write(self, path) -> Path:
        path = Path(path)
        try:
            path.write_text(self.to_svg())
        except OSError as exc:
            raise OSError(f"cannot write SVG {path}: {exc.strerror}") from exc
        return path


def arc_points(center, r: float, start, end, orientation: str = "ccw", n: int = ARC_SEGMENTS) -> np.ndarray:
    """Polyline along the circle about ``center`` from ``start`` to ``end`` in the given direction."""
    c = np.asarray(center, dtype=float)
    a0 = math.atan2(start[1] - c[1], start[0] - c[0])
    a1 = math.atan2(end[1] - c[1], end[0] - c[0])
    sweep = (a1 - a0) % (2 * math.pi)
    if orientation != "ccw":
        sweep -= 2 * math.pi
    t = a0 + sweep * np.linspace(0.0, 1.0, n + 1)
    return c + r * np.column_stack([np.cos(t), np.sin(t)])


def export_svg(curves, traces, path, offsets=()):
    """Write boundaries, optional offsets ``(curve, d)`` and polyline traces to one SVG file."""
    scene = Scene()
    for c in curves:
        scene.add_curve(c)
    for c, d in offsets:
        scene.add_offset(c, d)
    for t in traces:
        if isinstance(t, Polyline):
            scene.items.append(t)
        else:
            scene.add(t, stroke="steelblue", width=0.6)
    return scene.write(path)
