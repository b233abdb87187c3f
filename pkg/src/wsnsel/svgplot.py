"""Minimal SVG emitters: metric bar charts and network layout plots.

Hand-rolled SVG keeps the artifact free of plotting dependencies and makes
outputs bit-reproducible.
"""

from __future__ import annotations

import numpy as np

from .model import Scenario
from .selection import Solution

# link stroke color per routing-probability band:
# [delta, 0.25), [0.25, 0.5), [0.5, 0.75), [0.75, 1]
BAND_COLORS = ("#9ecae1", "#4292c6", "#2171b5", "#08306b")
BAND_EDGES = (0.25, 0.5, 0.75)


def _esc(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def bar_chart(
    labels: list[str],
    values: list[float],
    title: str,
    width: int = 640,
    height: int = 360,
) -> str:
    """One vertical bar per label; y axis from 0 to a padded maximum."""
    n = len(values)
    margin_l, margin_b, margin_t = 60, 70, 30
    plot_w = width - margin_l - 20
    plot_h = height - margin_t - margin_b
    vmax = max([v for v in values if v is not None] + [0.0]) or 1.0
    vmax *= 1.1
    bw = plot_w / max(n, 1)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" '
        f'font-size="14" font-family="sans-serif">{_esc(title)}</text>',
        f'<line x1="{margin_l}" y1="{margin_t}" x2="{margin_l}" '
        f'y2="{margin_t + plot_h}" stroke="black"/>',
        f'<line x1="{margin_l}" y1="{margin_t + plot_h}" '
        f'x2="{margin_l + plot_w}" y2="{margin_t + plot_h}" stroke="black"/>',
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = margin_t + plot_h * (1 - frac)
        parts.append(
            f'<text x="{margin_l - 6}" y="{y + 4:.1f}" text-anchor="end" '
            f'font-size="10" font-family="sans-serif">{vmax * frac:.3g}</text>'
        )
        parts.append(
            f'<line x1="{margin_l - 3}" y1="{y:.1f}" x2="{margin_l}" '
            f'y2="{y:.1f}" stroke="black"/>'
        )
    for k, (lab, v) in enumerate(zip(labels, values)):
        x = margin_l + k * bw + 0.15 * bw
        if v is not None:
            h = plot_h * v / vmax
            parts.append(
                f'<rect x="{x:.1f}" y="{margin_t + plot_h - h:.1f}" '
                f'width="{0.7 * bw:.1f}" height="{h:.1f}" fill="#4292c6"/>'
            )
        cx = margin_l + (k + 0.5) * bw
        ty = margin_t + plot_h + 12
        parts.append(
            f'<text x="{cx:.1f}" y="{ty}" text-anchor="end" font-size="9" '
            f'font-family="sans-serif" transform="rotate(-45 {cx:.1f} {ty})">'
            f"{_esc(lab)}</text>"
        )
    parts.append("</svg>")
    return "\n".join(parts)


def _band_color(t: float) -> str:
    k = int(np.searchsorted(np.array(BAND_EDGES), t, side="right"))
    return BAND_COLORS[k]


def network_plot(s: Scenario, sol: Solution, size: int = 600) -> str:
    """Node/link picture: sensors green, pure relays blue, APs black,
    inactive sensors hollow gray; links colored by probability band."""
    J = s.num_sensors
    pos = s.positions
    lo = pos.min(axis=0)
    span = float(max(pos.max(axis=0) - lo)) or 1.0
    pad = 30

    def xy(i):
        p = (pos[i] - lo) / span
        return pad + p[0] * (size - 2 * pad), size - pad - p[1] * (size - 2 * pad)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" '
        f'height="{size}" viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
    ]
    for i in range(J):
        for p in np.flatnonzero(sol.T[i] > 0):
            x1, y1 = xy(i)
            x2, y2 = xy(int(p))
            parts.append(
                f'<line x1="{x1:.1f}" y1="{y1:.1f}" x2="{x2:.1f}" '
                f'y2="{y2:.1f}" stroke="{_band_color(float(sol.T[i, p]))}" '
                f'stroke-width="2"/>'
            )
    active = np.zeros(J, dtype=bool)
    active[sol.active_nodes()] = True
    for i in range(s.num_nodes):
        x, y = xy(i)
        if i >= J:
            parts.append(
                f'<rect x="{x - 6:.1f}" y="{y - 6:.1f}" width="12" '
                f'height="12" fill="black"/>'
            )
        elif active[i] and sol.r[i] > 0:
            parts.append(f'<circle cx="{x:.1f}" cy="{y:.1f}" r="6" fill="#2ca02c"/>')
        elif active[i]:
            parts.append(f'<circle cx="{x:.1f}" cy="{y:.1f}" r="6" fill="#1f77b4"/>')
        else:
            parts.append(
                f'<circle cx="{x:.1f}" cy="{y:.1f}" r="4" fill="white" '
                f'stroke="#aaaaaa"/>'
            )
    parts.append("</svg>")
    return "\n".join(parts)
