"""Disc pictures of circles at infinity, as byte-deterministic SVG."""

from __future__ import annotations

import io
import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.path import Path  # noqa: E402
from matplotlib.patches import Circle, PathPatch  # noqa: E402

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"]

_RC = {
    "svg.hashsalt": "ideal-boundary",
    "svg.fonttype": "none",
    "font.family": "DejaVu Sans",
    "path.simplify": False,
}


def _xy(turn: float, r: float = 1.0):
    a = 2 * math.pi * float(turn)
    return r * math.cos(a), r * math.sin(a)


def _leaf_curve(a0: float, a1: float) -> Path:
    """Quadratic curve between two boundary angles, bowed towards the centre."""
    p0, p1 = _xy(a0), _xy(a1)
    d = ((float(a1) - float(a0)) % 1.0)
    bend = 1.0 - abs(math.sin(math.pi * d))
    mid = _xy((float(a0) + d / 2) % 1.0, bend)
    return Path([p0, mid, p1], [Path.MOVETO, Path.CURVE3, Path.CURVE3])


def disc_svg(fc=None, title: str = "", orbit_angles=None, max_leaves: int = 60) -> bytes:
    """SVG of the closed disc: ends coloured by foliation, gaps as black dots,
    sampled leaves as interior curves joining their two ends."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5, 5))
        ax.set_aspect("equal")
        ax.set_xlim(-1.25, 1.25)
        ax.set_ylim(-1.25, 1.25)
        ax.axis("off")
        ax.add_patch(Circle((0, 0), 1.0, fill=False, lw=0.8, color="#555555"))
        if fc is not None:
            colour = {f: PALETTE[i % len(PALETTE)] for i, f in enumerate(fc.foliations)}
            angles = fc.chart.angles
            pairs = {}
            for e in fc.ends:
                pairs.setdefault((e.foliation, str(e.seed)), {})[e.side] = e
            leaves = sorted((k, v) for k, v in pairs.items() if len(v) == 2)
            step = max(1, len(leaves) // max_leaves)
            for (fol, _seed), ends in leaves[::step]:
                path = _leaf_curve(angles[ends["+"].id], angles[ends["-"].id])
                ax.add_patch(PathPatch(path, fill=False, lw=0.5, alpha=0.6, color=colour[fol]))
            for f in fc.foliations:
                pts = [_xy(angles[e.id]) for e in sorted(fc.ends, key=lambda e: e.id) if e.foliation == f]
                if pts:
                    xs, ys = zip(*pts)
                    ax.scatter(xs, ys, s=6, color=colour[f], label=f, zorder=3)
            for g in fc.gaps:
                x, y = _xy(g.angle)
                ax.scatter([x], [y], s=28, color="black", zorder=4)
            ax.legend(loc="upper right", fontsize=7, frameon=False)
        if orbit_angles is not None:
            pts = [_xy(a, 1.04) for a in sorted(orbit_angles)]
            if pts:
                xs, ys = zip(*pts)
                ax.scatter(xs, ys, s=2, color="#d62728", zorder=3)
        if title:
            ax.set_title(title, fontsize=9)
        buf = io.BytesIO()
        fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
        plt.close(fig)
    return buf.getvalue()
