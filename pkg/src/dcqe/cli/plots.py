"""Dependency-free SVG line/step plots with the plotted data embedded.

Each plot carries its data as CSV inside ``<metadata>`` so a test (or a
reader) can recover the numbers without rasterizing anything.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 400
MARGIN = dict(left=70, right=20, top=40, bottom=50)
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


@dataclass
class Series:
    label: str
    x: np.ndarray
    y: np.ndarray
    kind: str = "line"  # "line", "step" or "points"


@dataclass
class Plot:
    title: str
    xlabel: str
    ylabel: str
    series: list[Series] = field(default_factory=list)
    vlines: list[tuple[str, float]] = field(default_factory=list)

    def add(self, label: str, x, y, kind: str = "line") -> "Plot":
        self.series.append(Series(label, np.asarray(x, dtype=float), np.asarray(y, dtype=float), kind))
        return self

    def marker(self, label: str, x: float) -> "Plot":
        if math.isfinite(x):
            self.vlines.append((label, float(x)))
        return self

    def to_svg(self) -> str:
        return render_svg(self)


def _limits(values: Sequence[float]) -> tuple[float, float]:
    vals = np.asarray([v for v in values if math.isfinite(v)], dtype=float)
    if vals.size == 0:
        return 0.0, 1.0
    lo, hi = float(vals.min()), float(vals.max())
    if hi == lo:
        pad = abs(lo) * 0.1 or 1.0
        return lo - pad, hi + pad
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def _fmt(v: float) -> str:
    return f"{v:.3g}"


def _data_table(plot: Plot) -> str:
    rows = ["series,x,y"]
    for s in plot.series:
        rows += [f"{s.label},{x:.10g},{y:.10g}" for x, y in zip(s.x, s.y)]
    rows += [f"marker:{label},{x:.10g}," for label, x in plot.vlines]
    return "\n".join(rows)


def render_svg(plot: Plot) -> str:
    xs = [v for s in plot.series for v in s.x] + [x for _, x in plot.vlines]
    ys = [v for s in plot.series for v in s.y]
    x0, x1 = _limits(xs)
    y0, y1 = _limits(ys)
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(x):
        return MARGIN["left"] + (x - x0) / (x1 - x0) * pw

    def py(y):
        return MARGIN["top"] + (1 - (y - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f"<title>{escape(plot.title)}</title>",
        f"<metadata>{escape(_data_table(plot))}</metadata>",
        f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
        f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" font-size="15">{escape(plot.title)}</text>',
        f'<text x="{WIDTH / 2}" y="{HEIGHT - 10}" text-anchor="middle" font-size="12">{escape(plot.xlabel)}</text>',
        f'<text x="16" y="{HEIGHT / 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 16 {HEIGHT / 2})">{escape(plot.ylabel)}</text>',
    ]
    for frac in (0.0, 0.5, 1.0):
        xv, yv = x0 + frac * (x1 - x0), y0 + frac * (y1 - y0)
        out.append(f'<text x="{px(xv):.1f}" y="{HEIGHT - MARGIN["bottom"] + 16}" text-anchor="middle" '
                   f'font-size="10">{_fmt(xv)}</text>')
        out.append(f'<text x="{MARGIN["left"] - 6}" y="{py(yv) + 4:.1f}" text-anchor="end" '
                   f'font-size="10">{_fmt(yv)}</text>')

    for i, s in enumerate(plot.series):
        color = PALETTE[i % len(PALETTE)]
        ok = np.isfinite(s.x) & np.isfinite(s.y)
        x, y = s.x[ok], s.y[ok]
        if s.kind == "points":
            out += [f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="2.5" fill="{color}"/>' for a, b in zip(x, y)]
        elif len(x):
            if s.kind == "step":
                # x holds bin centres; draw flat tops across each bin
                half = np.diff(x).mean() / 2 if len(x) > 1 else 0.5
                pts = [(a + d, b) for a, b in zip(x, y) for d in (-half, half)]
            else:
                pts = list(zip(x, y))
            path = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in pts)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        out.append(f'<text x="{WIDTH - MARGIN["right"] - 4}" y="{MARGIN["top"] + 14 + 14 * i}" '
                   f'text-anchor="end" font-size="11" fill="{color}">{escape(s.label)}</text>')
    for label, x in plot.vlines:
        out.append(f'<line class="marker" x1="{px(x):.2f}" x2="{px(x):.2f}" y1="{MARGIN["top"]}" '
                   f'y2="{HEIGHT - MARGIN["bottom"]}" stroke="#000" stroke-dasharray="4 3"/>')
        out.append(f'<text x="{px(x) + 3:.2f}" y="{MARGIN["top"] + 12}" font-size="10">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
