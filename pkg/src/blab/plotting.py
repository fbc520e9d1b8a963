"""Matplotlib report figures: orbit geometry next to the integral along the orbit."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def report_figure(path, polylines, values=None, value_label="F", title=None, boundaries=()):
    """Left: boundary curves and orbit polylines. Right: ``values`` against step, if given."""
    ncols = 2 if values is not None else 1
    fig, axes = plt.subplots(1, ncols, figsize=(5.5 * ncols, 5))
    axes = np.atleast_1d(axes)
    ax = axes[0]
    for b in boundaries:
        b = np.asarray(b)
        ax.plot(*np.vstack([b, b[:1]]).T, color="black", lw=1.2)
    for p in polylines:
        p = np.asarray(p)
        if len(p):
            ax.plot(p[:, 0], p[:, 1], lw=0.5, color="tab:blue", alpha=0.7)
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    if values is not None:
        v = np.asarray(values, dtype=float)
        ax2 = axes[1]
        ok = np.isfinite(v)
        if ok.any():
            ax2.plot(np.nonzero(ok)[0], v[ok] - v[ok][0], lw=0.8)
        ax2.set_xlabel("step")
        ax2.set_ylabel(f"{value_label} - {value_label}(0)")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
