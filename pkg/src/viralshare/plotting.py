"""Minimal dependency-free SVG line plots.

Just enough to render the package's diagnostic figures: axes, tick
labels, polylines, and an optional y = x reference line.  Anything
fancier should be built downstream from the CSV artifacts.
"""

from __future__ import annotations

import numpy as np

_W, _H = 640, 480
_ML, _MR, _MT, _MB = 70, 20, 40, 50
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _ticks(lo: float, hi: float, n: int = 5):
    return np.linspace(lo, hi, n)


def svg_line_plot(series, title: str = "", xlabel: str = "", ylabel: str = "",
                  identity_line: bool = False, vlines=()) -> str:
    """Render series [(xs, ys, label), ...] to an SVG string."""
    xs_all = np.concatenate([np.asarray(s[0], dtype=float) for s in series])
    ys_all = np.concatenate([np.asarray(s[1], dtype=float) for s in series])
    x0, x1 = float(xs_all.min()), float(xs_all.max())
    y0, y1 = float(ys_all.min()), float(ys_all.max())
    if identity_line:
        y0, y1 = min(y0, x0), max(y1, x1)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    pad = 0.04 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    def px(x):
        return _ML + (x - x0) / (x1 - x0) * (_W - _ML - _MR)

    def py(y):
        return _H - _MB - (y - y0) / (y1 - y0) * (_H - _MT - _MB)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" '
           f'height="{_H}" viewBox="0 0 {_W} {_H}">',
           f'<rect width="{_W}" height="{_H}" fill="white"/>']
    # axes
    out.append(f'<line x1="{_ML}" y1="{py(y0)}" x2="{_W - _MR}" '
               f'y2="{py(y0)}" stroke="black"/>')
    out.append(f'<line x1="{_ML}" y1="{py(y0)}" x2="{_ML}" y2="{_MT}" '
               f'stroke="black"/>')
    for t in _ticks(x0, x1):
        out.append(f'<line x1="{px(t)}" y1="{py(y0)}" x2="{px(t)}" '
                   f'y2="{py(y0) + 5}" stroke="black"/>')
        out.append(f'<text x="{px(t)}" y="{py(y0) + 20}" font-size="12" '
                   f'text-anchor="middle">{t:.3g}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<line x1="{_ML - 5}" y1="{py(t)}" x2="{_ML}" '
                   f'y2="{py(t)}" stroke="black"/>')
        out.append(f'<text x="{_ML - 8}" y="{py(t) + 4}" font-size="12" '
                   f'text-anchor="end">{t:.3g}</text>')
    if title:
        out.append(f'<text x="{_W / 2}" y="24" font-size="15" '
                   f'text-anchor="middle">{title}</text>')
    if xlabel:
        out.append(f'<text x="{_W / 2}" y="{_H - 12}" font-size="13" '
                   f'text-anchor="middle">{xlabel}</text>')
    if ylabel:
        out.append(f'<text x="16" y="{_H / 2}" font-size="13" '
                   f'text-anchor="middle" transform="rotate(-90 16 '
                   f'{_H / 2})">{ylabel}</text>')
    if identity_line:
        lo, hi = max(x0, y0), min(x1, y1)
        out.append(f'<line x1="{px(lo)}" y1="{py(lo)}" x2="{px(hi)}" '
                   f'y2="{py(hi)}" stroke="#999" stroke-dasharray="5,4"/>')
    for v in vlines:
        out.append(f'<line x1="{px(v)}" y1="{py(y0)}" x2="{px(v)}" '
                   f'y2="{_MT}" stroke="#999" stroke-dasharray="2,3"/>')
    for i, (sx, sy, label) in enumerate(series):
        color = _COLORS[i % len(_COLORS)]
        pts = " ".join(f"{px(float(a)):.2f},{py(float(b)):.2f}"
                       for a, b in zip(sx, sy))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                   f'stroke-width="1.5"/>')
        if label:
            out.append(f'<text x="{_W - _MR - 8}" y="{_MT + 18 + 16 * i}" '
                       f'font-size="12" text-anchor="end" '
                       f'fill="{color}">{label}</text>')
    out.append("</svg>")
    return "\n".join(out)
