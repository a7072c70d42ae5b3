"""Minimal deterministic SVG emitters for benchmark curves and registration overlays.

Output depends only on the input values, so identical inputs give
byte-identical files.
"""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"]

WIDTH, HEIGHT = 640, 440
MARGIN = dict(left=80, right=150, top=40, bottom=60)


def _f(v: float) -> str:
    return f"{v:.2f}"


def _tick_label(v: float) -> str:
    if v == 0:
        return "0"
    if abs(v) >= 1e4 or abs(v) < 1e-3:
        return f"{v:.0e}"
    return f"{v:.4g}"


def _nice_ticks(lo: float, hi: float, n: int = 5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    ticks = []
    v = start
    while v <= hi + step * 1e-9:
        ticks.append(round(v, 12))
        v += step
    return ticks


class _Axis:
    def __init__(self, values, log: bool, pixel_lo: float, pixel_hi: float):
        vals = [v for v in values if math.isfinite(v) and (v > 0 or not log)]
        self.log = log
        if log:
            if vals:
                lo = math.floor(math.log10(min(vals)))
                hi = math.ceil(math.log10(max(vals)))
            else:
                lo, hi = 0, 1
            if hi <= lo:
                hi = lo + 1
        else:
            lo, hi = (min(vals), max(vals)) if vals else (0.0, 1.0)
            if hi <= lo:
                lo, hi = lo - 0.5, hi + 0.5
            pad = 0.05 * (hi - lo)
            lo, hi = lo - pad, hi + pad
        self.lo, self.hi = lo, hi
        self.p0, self.p1 = pixel_lo, pixel_hi

    def __call__(self, v: float) -> float:
        t = math.log10(v) if self.log else v
        return self.p0 + (t - self.lo) / (self.hi - self.lo) * (self.p1 - self.p0)

    def ticks(self):
        if self.log:
            return [10.0**e for e in range(int(self.lo), int(self.hi) + 1)]
        return [t for t in _nice_ticks(self.lo, self.hi) if self.lo <= t <= self.hi]


def _header(title: str) -> list:
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
    ]


def _frame(out: list, xa: _Axis, ya: _Axis, xlabel: str, ylabel: str, box):
    x0, y0, x1, y1 = box
    out.append(f'<rect x="{_f(x0)}" y="{_f(y1)}" width="{_f(x1 - x0)}" height="{_f(y0 - y1)}" '
               'fill="none" stroke="black"/>')
    for t in xa.ticks():
        px = xa(t)
        out.append(f'<line x1="{_f(px)}" y1="{_f(y0)}" x2="{_f(px)}" y2="{_f(y0 + 5)}" stroke="black"/>')
        out.append(f'<text x="{_f(px)}" y="{_f(y0 + 18)}" text-anchor="middle">{_tick_label(t)}</text>')
    for t in ya.ticks():
        py = ya(t)
        out.append(f'<line x1="{_f(x0 - 5)}" y1="{_f(py)}" x2="{_f(x0)}" y2="{_f(py)}" stroke="black"/>')
        out.append(f'<text x="{_f(x0 - 8)}" y="{_f(py + 4)}" text-anchor="end">{_tick_label(t)}</text>')
    out.append(f'<text class="xlabel" x="{_f((x0 + x1) / 2)}" y="{_f(y0 + 40)}" '
               f'text-anchor="middle">{escape(xlabel)}</text>')
    cy = (y0 + y1) / 2
    out.append(f'<text class="ylabel" x="{_f(x0 - 60)}" y="{_f(cy)}" text-anchor="middle" '
               f'transform="rotate(-90 {_f(x0 - 60)} {_f(cy)})">{escape(ylabel)}</text>')


def line_plot(series: dict, xlabel: str, ylabel: str, title: str = "", logx=False, logy=False) -> str:
    """One ``<polyline>`` per named series of ``(x, y)`` pairs, with a legend."""
    x0, x1 = MARGIN["left"], WIDTH - MARGIN["right"]
    y0, y1 = HEIGHT - MARGIN["bottom"], MARGIN["top"]
    xs = [x for pts in series.values() for x, _ in pts]
    ys = [y for pts in series.values() for _, y in pts]
    xa = _Axis(xs, logx, x0, x1)
    ya = _Axis(ys, logy, y0, y1)

    out = _header(title)
    _frame(out, xa, ya, xlabel, ylabel, (x0, y0, x1, y1))
    for i, (name, pts) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        good = [(x, y) for x, y in pts if _plottable(x, logx) and _plottable(y, logy)]
        coords = " ".join(f"{_f(xa(x))},{_f(ya(y))}" for x, y in sorted(good))
        out.append(f'<polyline data-series="{escape(name)}" points="{coords}" fill="none" '
                   f'stroke="{color}" stroke-width="2"/>')
        for x, y in sorted(good):
            out.append(f'<circle cx="{_f(xa(x))}" cy="{_f(ya(y))}" r="3" fill="{color}"/>')
        ly = y1 + 10 + 18 * i
        out.append(f'<line x1="{_f(x1 + 12)}" y1="{_f(ly)}" x2="{_f(x1 + 36)}" y2="{_f(ly)}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{_f(x1 + 42)}" y="{_f(ly + 4)}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _plottable(v, log):
    return math.isfinite(v) and (v > 0 or not log)


def overlay_scatter(scene, transformed, title: str = "") -> str:
    """Scene points as circles, transformed model points as crosses.

    3-D data is shown as three axis-aligned projections side by side.
    """
    scene = np.asarray(scene, dtype=np.float64)
    transformed = np.asarray(transformed, dtype=np.float64)
    D = scene.shape[1]
    if D == 1:
        pairs = [(0, None)]
    elif D == 2:
        pairs = [(0, 1)]
    else:
        pairs = [(0, 1), (0, 2), (1, 2)]
    names = "xyz"
    panel_w = (WIDTH - 40) / len(pairs)
    out = _header(title)
    both = np.vstack([scene, transformed])
    for k, (a, b) in enumerate(pairs):
        left = 20 + k * panel_w + 40
        right = 20 + (k + 1) * panel_w - 10
        bottom, top = HEIGHT - MARGIN["bottom"], MARGIN["top"] + 10
        xa = _Axis(both[:, a].tolist(), False, left, right)
        yvals = both[:, b].tolist() if b is not None else [0.0]
        ya = _Axis(yvals, False, bottom, top)
        la = names[a] if a < 3 else f"d{a}"
        lb = (names[b] if b < 3 else f"d{b}") if b is not None else ""
        _frame(out, xa, ya, la, lb, (left, bottom, right, top))
        out.append(f'<g class="scene" fill="#1f77b4" fill-opacity="0.6">')
        for row in scene:
            y = row[b] if b is not None else 0.0
            out.append(f'<circle cx="{_f(xa(row[a]))}" cy="{_f(ya(y))}" r="1.6"/>')
        out.append("</g>")
        out.append('<g class="model" stroke="#d62728" stroke-width="1">')
        for row in transformed:
            y = row[b] if b is not None else 0.0
            cx, cy = xa(row[a]), ya(y)
            out.append(f'<path d="M{_f(cx - 2)} {_f(cy - 2)}L{_f(cx + 2)} {_f(cy + 2)}'
                       f'M{_f(cx - 2)} {_f(cy + 2)}L{_f(cx + 2)} {_f(cy - 2)}"/>')
        out.append("</g>")
    out.append(f'<text x="20" y="{HEIGHT - 8}" fill="#1f77b4">o scene</text>')
    out.append(f'<text x="90" y="{HEIGHT - 8}" fill="#d62728">x transformed model</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
