"""Minimal SVG writer: world snapshots and metric-vs-x line plots."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

ROBOT_FILL = "#f4c430"
CROWD_FILL = "#a0a0a0"
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _n(v: float) -> str:
    """Fixed-precision coordinate, so output bytes do not depend on float noise."""
    s = f"{v:.3f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


class Canvas:
    """Accumulates SVG elements in pixel space."""

    def __init__(self, width: float, height: float):
        self.width, self.height = width, height
        self.parts: list[str] = []

    def add(self, tag: str, text: str | None = None, **attrs) -> None:
        a = " ".join(f'{k.rstrip("_").replace("_", "-")}="{_attr(v)}"' for k, v in attrs.items())
        if text is None:
            self.parts.append(f"<{tag} {a}/>")
        else:
            self.parts.append(f"<{tag} {a}>{escape(text)}</{tag}>")

    def raw(self, s: str) -> None:
        self.parts.append(s)

    def circle(self, cx, cy, r, **attrs):
        self.add("circle", cx=cx, cy=cy, r=r, **attrs)

    def line(self, x1, y1, x2, y2, **attrs):
        self.add("line", x1=x1, y1=y1, x2=x2, y2=y2, **attrs)

    def rect(self, x, y, w, h, **attrs):
        self.add("rect", x=x, y=y, width=w, height=h, **attrs)

    def text(self, x, y, s, **attrs):
        self.add("text", s, x=x, y=y, **attrs)

    def polyline(self, pts, **attrs):
        self.add("polyline", points=" ".join(f"{_n(x)},{_n(y)}" for x, y in pts), **attrs)

    def render(self) -> str:
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{_n(self.width)}" '
                f'height="{_n(self.height)}" viewBox="0 0 {_n(self.width)} {_n(self.height)}">')
        return "\n".join(['<?xml version="1.0" encoding="UTF-8"?>', head, *self.parts, "</svg>", ""])


def _attr(v) -> str:
    if isinstance(v, float):
        return _n(v)
    return escape(str(v), {'"': "&quot;"})


# --- world snapshot ------------------------------------------------------

def snapshot(row: dict, header: dict, view: tuple[float, float, float, float],
             scale: float = 60.0, margin: float = 20.0) -> str:
    """Render one trace row.  ``view`` is ``(x0, y0, x1, y1)`` in metres."""
    x0, y0, x1, y1 = view
    cv = Canvas((x1 - x0) * scale + 2 * margin, (y1 - y0) * scale + 2 * margin + 18)

    def px(x):
        return margin + (x - x0) * scale

    def py(y):
        return margin + (y1 - y) * scale

    width, height, goal_x = header["width"], header["height"], header["goal_x_min"]
    cv.raw(f'<defs><clipPath id="view"><rect x="{_n(px(x0))}" y="{_n(py(y1))}" '
           f'width="{_n((x1 - x0) * scale)}" height="{_n((y1 - y0) * scale)}"/></clipPath></defs>')
    cv.rect(px(x0), py(y1), (x1 - x0) * scale, (y1 - y0) * scale, fill="white", stroke="#cccccc")
    cv.raw('<g clip-path="url(#view)">')
    # crowd region, goal boundary, solid corridor walls
    cv.rect(px(0.0), py(height), width * scale, height * scale, fill="#f7f7f7",
            stroke="#555555", stroke_dasharray="4 3", class_="region")
    cv.line(px(goal_x), py(0.0), px(goal_x), py(height), stroke="#2ca02c",
            stroke_width=1.5, stroke_dasharray="6 3", class_="goal")
    for ya in (0.0, height):
        for xa, xb in ((min(x0, 0.0), 0.0), (width, max(x1, width))):
            if xb > xa:
                cv.line(px(xa), py(ya), px(xb), py(ya), stroke="black", stroke_width=3, class_="wall")
    rc = header["comfort_radius"] * scale
    for x, y in row["crowd"]:
        cv.circle(px(x), py(y), rc, fill=CROWD_FILL, fill_opacity=0.7, stroke="#666666",
                  stroke_width=0.5, class_="crowd")
    robots = row["robots"]
    for i, leader in enumerate(row.get("leaders") or ()):
        if leader is not None:
            (ax, ay), (bx, by) = robots[i], robots[leader - 1]
            cv.line(px(ax), py(ay), px(bx), py(by), stroke="#d62728", stroke_width=1.5, class_="link")
    rr = header["robot_radius"] * scale
    for x, y in robots:
        cv.circle(px(x), py(y), rr, fill=ROBOT_FILL, stroke="black", stroke_width=0.8, class_="robot")
    cv.raw("</g>")
    cv.text(margin, cv.height - 6, f"k = {row['k']}, t = {row['k'] * header['dt']:.1f} s",
            font_family="sans-serif", font_size=12)
    return cv.render()


# --- line plots -----------------------------------------------------------

def nice_ticks(lo: float, hi: float, n: int = 5) -> np.ndarray:
    if not math.isfinite(lo) or not math.isfinite(hi):
        raise ValueError("axis limits must be finite")
    if hi <= lo:
        lo, hi = lo - 0.5, hi + 0.5
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.floor(lo / step) * step
    stop = math.ceil(hi / step) * step
    return np.round(np.arange(start, stop + 0.5 * step, step), 10)


def _tick_label(v: float) -> str:
    return f"{v:g}"


def line_plot(series: dict[str, list[tuple]], xlabel: str, ylabel: str, title: str = "",
              width: float = 640, height: float = 420, zero_line: bool = False) -> str:
    """One polyline per series through the medians, with q1..q3 whiskers.

    ``series`` maps a label to points ``(x, median, q1, q3)``; points with a
    ``None`` median are skipped.
    """
    pts = {k: [p for p in v if p[1] is not None] for k, v in series.items()}
    xs = [p[0] for v in pts.values() for p in v]
    ys = [y for v in pts.values() for p in v for y in p[1:] if y is not None]
    if not xs:
        raise ValueError("nothing to plot")
    xt = nice_ticks(min(xs), max(xs))
    yt = nice_ticks(min(ys + [0.0] if zero_line else ys), max(ys))
    left, right, top, bottom = 70, 150, 40 if title else 20, 55
    pw, ph = width - left - right, height - top - bottom
    cv = Canvas(width, height)

    pad = 0.04 * (xt[-1] - xt[0])
    xlo, xhi = xt[0] - pad, xt[-1] + pad

    def px(x):
        return left + (x - xlo) / (xhi - xlo) * pw

    def py(y):
        return top + (yt[-1] - y) / (yt[-1] - yt[0]) * ph

    font = dict(font_family="sans-serif", font_size=12)
    if title:
        cv.text(left + pw / 2, 22, title, text_anchor="middle", **{**font, "font_size": 14})
    cv.rect(left, top, pw, ph, fill="white", stroke="black")
    for x in xt:
        cv.line(px(x), top + ph, px(x), top + ph + 5, stroke="black")
        cv.text(px(x), top + ph + 18, _tick_label(x), text_anchor="middle", **font)
    for y in yt:
        cv.line(left - 5, py(y), left, py(y), stroke="black")
        cv.line(left, py(y), left + pw, py(y), stroke="#eeeeee")
        cv.text(left - 8, py(y) + 4, _tick_label(y), text_anchor="end", **font)
    if zero_line and yt[0] < 0 < yt[-1]:
        cv.line(left, py(0.0), left + pw, py(0.0), stroke="#888888", stroke_dasharray="4 3")
    cv.text(left + pw / 2, height - 12, xlabel, text_anchor="middle", **font)
    cv.text(18, top + ph / 2, ylabel, text_anchor="middle",
            transform=f"rotate(-90 18 {_n(top + ph / 2)})", **font)
    for i, (label, v) in enumerate(pts.items()):
        color = PALETTE[i % len(PALETTE)]
        v = sorted(v)
        for x, med, q1, q3 in v:
            if q1 is not None and q3 is not None:
                cv.line(px(x), py(q1), px(x), py(q3), stroke=color, stroke_width=1.5)
                for q in (q1, q3):
                    cv.line(px(x) - 4, py(q), px(x) + 4, py(q), stroke=color, stroke_width=1.5)
            cv.circle(px(x), py(med), 3.5, fill=color, class_="median")
        if len(v) > 1:
            cv.polyline([(px(p[0]), py(p[1])) for p in v], fill="none", stroke=color, stroke_width=1.5)
        ly = top + 10 + 20 * i
        cv.line(left + pw + 15, ly, left + pw + 35, ly, stroke=color, stroke_width=2)
        cv.text(left + pw + 40, ly + 4, label, **font)
    return cv.render()
