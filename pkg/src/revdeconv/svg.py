"""Minimal deterministic SVG line/scatter charts.

Hand-rolled on purpose: output must be byte-identical between runs, which
rules out plotting back ends that stamp dates or random ids into files.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 30, 50

COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#7f7f7f")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


class Chart:
    def __init__(self, title: str, xlabel: str, ylabel: str,
                 xlim: tuple[float, float], ylim: tuple[float, float],
                 logx: bool = False, logy: bool = False):
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel
        self.logx, self.logy = logx, logy
        self.xlim = self._prep(xlim, logx)
        self.ylim = self._prep(ylim, logy)
        self.items: list[str] = []

    @staticmethod
    def _prep(lim, log):
        lo, hi = lim
        if log:
            lo, hi = math.log10(lo), math.log10(hi)
        if hi <= lo:
            hi = lo + 1.0
        return lo, hi

    def _x(self, v: float) -> float:
        v = math.log10(v) if self.logx else v
        lo, hi = self.xlim
        return LEFT + (v - lo) / (hi - lo) * (WIDTH - LEFT - RIGHT)

    def _y(self, v: float) -> float:
        v = math.log10(v) if self.logy else v
        lo, hi = self.ylim
        return HEIGHT - BOTTOM - (v - lo) / (hi - lo) * (HEIGHT - TOP - BOTTOM)

    def line(self, xs: Sequence[float], ys: Sequence[float], color: str = COLORS[0],
             dash: bool = False, label: Optional[str] = None) -> None:
        pts = " ".join(f"{_fmt(self._x(x))},{_fmt(self._y(y))}" for x, y in zip(xs, ys))
        style = ' stroke-dasharray="6,4"' if dash else ""
        self.items.append(f'<polyline class="line" fill="none" stroke="{color}" '
                          f'stroke-width="1.5"{style} points="{pts}"/>')
        if label:
            self._legend(label, color)

    def markers(self, xs: Sequence[float], ys: Sequence[float], colors: Sequence[str],
                titles: Optional[Sequence[str]] = None) -> None:
        for i, (x, y, c) in enumerate(zip(xs, ys, colors)):
            tip = f"<title>{escape(titles[i])}</title>" if titles else ""
            self.items.append(f'<circle class="marker" cx="{_fmt(self._x(x))}" '
                              f'cy="{_fmt(self._y(y))}" r="3" fill="{c}">{tip}</circle>')

    def _legend(self, label: str, color: str) -> None:
        n = sum(1 for s in self.items if s.startswith("<text class=\"legend\""))
        y = TOP + 14 + 16 * n
        self.items.append(f'<text class="legend" x="{WIDTH - RIGHT - 200}" y="{y}" '
                          f'font-size="12" fill="{color}">{escape(label)}</text>')

    def render(self) -> str:
        x0, x1 = LEFT, WIDTH - RIGHT
        y0, y1 = HEIGHT - BOTTOM, TOP
        head = [
            '<?xml version="1.0" encoding="UTF-8"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}">',
            f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
            f'<text x="{WIDTH // 2}" y="18" font-size="14" text-anchor="middle">'
            f'{escape(self.title)}</text>',
            f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
            f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
            f'<text x="{(x0 + x1) // 2}" y="{HEIGHT - 12}" font-size="12" '
            f'text-anchor="middle">{escape(self.xlabel)}</text>',
            f'<text x="16" y="{(y0 + y1) // 2}" font-size="12" text-anchor="middle" '
            f'transform="rotate(-90 16 {(y0 + y1) // 2})">{escape(self.ylabel)}</text>',
        ]
        head += self._ticks()
        return "\n".join(head + self.items + ["</svg>", ""])

    def _ticks(self) -> list[str]:
        out = []
        for axis, (lo, hi), log in (("x", self.xlim, self.logx), ("y", self.ylim, self.logy)):
            for i in range(5):
                v = lo + (hi - lo) * i / 4
                real = 10 ** v if log else v
                label = f"{real:.3g}"
                if axis == "x":
                    px = LEFT + (v - lo) / (hi - lo) * (WIDTH - LEFT - RIGHT)
                    out.append(f'<text x="{_fmt(px)}" y="{HEIGHT - BOTTOM + 16}" font-size="10" '
                               f'text-anchor="middle">{label}</text>')
                else:
                    py = HEIGHT - BOTTOM - (v - lo) / (hi - lo) * (HEIGHT - TOP - BOTTOM)
                    out.append(f'<text x="{LEFT - 6}" y="{_fmt(py + 3)}" font-size="10" '
                               f'text-anchor="end">{label}</text>')
        return out
