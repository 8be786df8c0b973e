"""Small static SVG writer for experiment plots.

Only the primitives the harness needs: a multi-series line plot with an
optionally logarithmic x axis, and a labelled bar chart.  Output is plain
SVG 1.1 markup with polylines and text, no external tooling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

__all__ = ["Series", "line_plot", "bar_chart"]

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")

_WIDTH, _HEIGHT = 720, 480
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 70, 20, 40, 50


@dataclass
class Series:
    label: str
    x: list = field(default_factory=list)
    y: list = field(default_factory=list)


def _nice_ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / count
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    start = math.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-12 * step:
        ticks.append(t)
        t += step
    return ticks


def _fmt(v: float) -> str:
    if v == 0:
        return "0"
    if abs(v) >= 1e4 or abs(v) < 1e-3:
        return f"{v:.1e}"
    return f"{v:g}"


class _Canvas:
    def __init__(self, title: str):
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
            f'viewBox="0 0 {_WIDTH} {_HEIGHT}" font-family="sans-serif" font-size="12">',
            f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
            f'<text x="{_WIDTH / 2}" y="22" text-anchor="middle" font-size="15">{title}</text>',
        ]

    def line(self, x1, y1, x2, y2, color="#999", width=1.0):
        self.parts.append(
            f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}" stroke="{color}" stroke-width="{width}"/>'
        )

    def polyline(self, pts, color, width=1.6):
        coords = " ".join(f"{x:.2f},{y:.2f}" for x, y in pts)
        self.parts.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="{width}"/>')

    def text(self, x, y, s, anchor="middle", size=12, rotate=None):
        extra = f' transform="rotate({rotate} {x:.1f} {y:.1f})"' if rotate is not None else ""
        self.parts.append(f'<text x="{x:.1f}" y="{y:.1f}" text-anchor="{anchor}" font-size="{size}"{extra}>{s}</text>')

    def rect(self, x, y, w, h, color):
        self.parts.append(f'<rect x="{x:.2f}" y="{y:.2f}" width="{w:.2f}" height="{h:.2f}" fill="{color}"/>')

    def write(self, path):
        self.parts.append("</svg>")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(self.parts))


def line_plot(path, series: list[Series], xlabel: str, ylabel: str, title: str, xlog: bool = False):
    """Render one or more (x, y) series as polylines with axes and a legend."""
    xs = [float(v) for s in series for v in s.x]
    ys = [float(v) for s in series for v in s.y]
    if not xs:
        raise ValueError("nothing to plot")

    if xlog:
        if min(xs) <= 0:
            raise ValueError("log-scale x axis needs positive values")
        to_x = math.log10
    else:
        to_x = float
    x_lo, x_hi = min(map(to_x, xs)), max(map(to_x, xs))
    y_lo, y_hi = min(ys), max(ys)
    if x_hi == x_lo:
        x_hi += 1.0
    pad = 0.05 * (y_hi - y_lo) or max(1e-12, 0.1 * abs(y_hi) or 1.0)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    plot_w = _WIDTH - _MARGIN_L - _MARGIN_R
    plot_h = _HEIGHT - _MARGIN_T - _MARGIN_B

    def px(x):
        return _MARGIN_L + (to_x(x) - x_lo) / (x_hi - x_lo) * plot_w

    def py(y):
        return _MARGIN_T + (y_hi - y) / (y_hi - y_lo) * plot_h

    canvas = _Canvas(title)
    canvas.line(_MARGIN_L, _MARGIN_T, _MARGIN_L, _MARGIN_T + plot_h, "#333")
    canvas.line(_MARGIN_L, _MARGIN_T + plot_h, _MARGIN_L + plot_w, _MARGIN_T + plot_h, "#333")

    if xlog:
        lo_dec, hi_dec = math.floor(x_lo), math.ceil(x_hi)
        for dec in range(lo_dec, hi_dec + 1):
            if x_lo - 1e-9 <= dec <= x_hi + 1e-9:
                x = _MARGIN_L + (dec - x_lo) / (x_hi - x_lo) * plot_w
                canvas.line(x, _MARGIN_T, x, _MARGIN_T + plot_h, "#ddd")
                canvas.text(x, _MARGIN_T + plot_h + 16, f"1e{dec}")
    else:
        for t in _nice_ticks(x_lo, x_hi):
            x = _MARGIN_L + (t - x_lo) / (x_hi - x_lo) * plot_w
            canvas.line(x, _MARGIN_T, x, _MARGIN_T + plot_h, "#ddd")
            canvas.text(x, _MARGIN_T + plot_h + 16, _fmt(t))

    for t in _nice_ticks(y_lo, y_hi):
        y = py(t)
        canvas.line(_MARGIN_L, y, _MARGIN_L + plot_w, y, "#ddd")
        canvas.text(_MARGIN_L - 6, y + 4, _fmt(t), anchor="end")

    for i, s in enumerate(series):
        color = _COLORS[i % len(_COLORS)]
        pts = [(px(x), py(y)) for x, y in zip(s.x, s.y)]
        canvas.polyline(pts, color)
        ly = _MARGIN_T + 14 + 16 * i
        canvas.line(_MARGIN_L + plot_w - 130, ly - 4, _MARGIN_L + plot_w - 104, ly - 4, color, 2.0)
        canvas.text(_MARGIN_L + plot_w - 98, ly, s.label, anchor="start")

    canvas.text(_MARGIN_L + plot_w / 2, _HEIGHT - 12, xlabel)
    canvas.text(18, _MARGIN_T + plot_h / 2, ylabel, rotate=-90)
    canvas.write(path)


def bar_chart(path, labels: list[str], values: list[float], ylabel: str, title: str):
    """Render labelled vertical bars, annotated with their values."""
    if not values:
        raise ValueError("nothing to plot")
    plot_w = _WIDTH - _MARGIN_L - _MARGIN_R
    plot_h = _HEIGHT - _MARGIN_T - _MARGIN_B
    v_hi = max(values) * 1.1

    canvas = _Canvas(title)
    canvas.line(_MARGIN_L, _MARGIN_T, _MARGIN_L, _MARGIN_T + plot_h, "#333")
    canvas.line(_MARGIN_L, _MARGIN_T + plot_h, _MARGIN_L + plot_w, _MARGIN_T + plot_h, "#333")
    for t in _nice_ticks(0.0, v_hi):
        y = _MARGIN_T + plot_h * (1.0 - t / v_hi)
        canvas.line(_MARGIN_L, y, _MARGIN_L + plot_w, y, "#ddd")
        canvas.text(_MARGIN_L - 6, y + 4, _fmt(t), anchor="end")

    slot = plot_w / len(values)
    for i, (label, value) in enumerate(zip(labels, values)):
        h = plot_h * value / v_hi
        x = _MARGIN_L + slot * (i + 0.25)
        canvas.rect(x, _MARGIN_T + plot_h - h, slot * 0.5, h, _COLORS[i % len(_COLORS)])
        canvas.text(_MARGIN_L + slot * (i + 0.5), _MARGIN_T + plot_h + 16, label)
        canvas.text(_MARGIN_L + slot * (i + 0.5), _MARGIN_T + plot_h - h - 6, _fmt(value))

    canvas.text(18, _MARGIN_T + plot_h / 2, ylabel, rotate=-90)
    canvas.write(path)
