"""Tiny self-contained SVG line plots (convenience output only)."""

from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")
_W, _H, _PAD = 640, 420, 60


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    return [lo + (hi - lo) * k / (n - 1) for k in range(n)]


def line_plot(series: dict[str, tuple[list[float], list[float]]], path: str | Path, *,
              xlabel: str = "", ylabel: str = "", title: str = "") -> None:
    """Write one polyline per series; non-finite y values break the line."""
    pts = [(x, y) for xs, ys in series.values() for x, y in zip(xs, ys) if math.isfinite(y)]
    if not pts:
        pts = [(0.0, 0.0), (1.0, 1.0)]
    x_lo, x_hi = min(p[0] for p in pts), max(p[0] for p in pts)
    y_lo, y_hi = min(p[1] for p in pts), max(p[1] for p in pts)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0

    def sx(x):
        return _PAD + (x - x_lo) / (x_hi - x_lo) * (_W - 2 * _PAD)

    def sy(y):
        return _H - _PAD - (y - y_lo) / (y_hi - y_lo) * (_H - 2 * _PAD)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
           f'font-family="sans-serif" font-size="12">',
           f'<rect width="{_W}" height="{_H}" fill="white"/>',
           f'<rect x="{_PAD}" y="{_PAD}" width="{_W - 2 * _PAD}" height="{_H - 2 * _PAD}" '
           'fill="none" stroke="black"/>']
    for x in _ticks(x_lo, x_hi):
        out.append(f'<text x="{sx(x):.1f}" y="{_H - _PAD + 16}" text-anchor="middle">{x:.3g}</text>')
    for y in _ticks(y_lo, y_hi):
        out.append(f'<text x="{_PAD - 6}" y="{sy(y) + 4:.1f}" text-anchor="end">{y:.3g}</text>')
    out.append(f'<text x="{_W / 2}" y="{_H - 15}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="15" y="{_H / 2}" text-anchor="middle" '
               f'transform="rotate(-90 15 {_H / 2})">{escape(ylabel)}</text>')
    out.append(f'<text x="{_W / 2}" y="25" text-anchor="middle">{escape(title)}</text>')

    for k, (name, (xs, ys)) in enumerate(series.items()):
        color = _COLORS[k % len(_COLORS)]
        run: list[str] = []
        for x, y in list(zip(xs, ys)) + [(math.nan, math.nan)]:
            if math.isfinite(y):
                run.append(f"{sx(x):.1f},{sy(y):.1f}")
                continue
            if run:
                out.append(f'<polyline points="{" ".join(run)}" fill="none" '
                           f'stroke="{color}" stroke-width="2"/>')
            run = []
        ly = _PAD + 16 + 16 * k
        out.append(f'<line x1="{_W - _PAD - 110}" y1="{ly - 4}" x2="{_W - _PAD - 90}" '
                   f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{_W - _PAD - 85}" y="{ly}">{escape(name)}</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")
