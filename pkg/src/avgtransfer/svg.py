"""Tiny SVG line-plot writer (polylines, markers, axes, labels)."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#7f7f7f"]


class Figure:
    def __init__(self, xlim, ylim, width=640, height=480, margin=50, title="",
                 xlabel="", ylabel=""):
        self.xlim = tuple(map(float, xlim))
        self.ylim = tuple(map(float, ylim))
        self.width, self.height, self.margin = width, height, margin
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel
        self._items: list[str] = []

    def _px(self, x, y):
        (x0, x1), (y0, y1) = self.xlim, self.ylim
        w = self.width - 2 * self.margin
        h = self.height - 2 * self.margin
        return (self.margin + (x - x0) / (x1 - x0) * w,
                self.height - self.margin - (y - y0) / (y1 - y0) * h)

    def polyline(self, xs, ys, color="#000000", width=1.2, dash=None):
        # split at non-finite values so gaps stay gaps
        run: list[str] = []
        for x, y in zip(xs, ys):
            if math.isfinite(x) and math.isfinite(y):
                px, py = self._px(x, y)
                run.append(f"{px:.2f},{py:.2f}")
            elif run:
                self._line(run, color, width, dash)
                run = []
        if run:
            self._line(run, color, width, dash)

    def _line(self, pts, color, width, dash):
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self._items.append(f'<polyline fill="none" stroke="{color}" stroke-width="{width}"'
                           f'{extra} points="{" ".join(pts)}"/>')

    def marker(self, x, y, color="#000000", r=3.5, label=None):
        px, py = self._px(x, y)
        self._items.append(f'<circle cx="{px:.2f}" cy="{py:.2f}" r="{r}" fill="{color}"/>')
        if label:
            self.text(x, y, label, dx=6, dy=-6)

    def text(self, x, y, s, dx=0, dy=0, size=11):
        px, py = self._px(x, y)
        self._items.append(f'<text x="{px + dx:.2f}" y="{py + dy:.2f}" font-size="{size}" '
                           f'font-family="sans-serif">{escape(s)}</text>')

    def legend(self, entries):
        y = self.margin + 12
        for label, color in entries:
            x = self.width - self.margin - 150
            self._items.append(f'<line x1="{x}" y1="{y - 4}" x2="{x + 20}" y2="{y - 4}" '
                               f'stroke="{color}" stroke-width="2"/>')
            self._items.append(f'<text x="{x + 26}" y="{y}" font-size="11" '
                               f'font-family="sans-serif">{escape(label)}</text>')
            y += 16

    def _axes(self):
        (x0, x1), (y0, y1) = self.xlim, self.ylim
        m, W, H = self.margin, self.width, self.height
        out = [f'<rect x="{m}" y="{m}" width="{W - 2 * m}" height="{H - 2 * m}" '
               f'fill="none" stroke="#000000" stroke-width="1"/>']
        for i in range(5):
            xv = x0 + (x1 - x0) * i / 4
            yv = y0 + (y1 - y0) * i / 4
            px, _ = self._px(xv, y0)
            _, py = self._px(x0, yv)
            out.append(f'<text x="{px:.2f}" y="{H - m + 15}" font-size="10" text-anchor="middle" '
                       f'font-family="sans-serif">{xv:.3g}</text>')
            out.append(f'<text x="{m - 5}" y="{py + 3:.2f}" font-size="10" text-anchor="end" '
                       f'font-family="sans-serif">{yv:.3g}</text>')
        if self.title:
            out.append(f'<text x="{W / 2}" y="{m / 2}" font-size="13" text-anchor="middle" '
                       f'font-family="sans-serif">{escape(self.title)}</text>')
        if self.xlabel:
            out.append(f'<text x="{W / 2}" y="{H - 10}" font-size="12" text-anchor="middle" '
                       f'font-family="sans-serif">{escape(self.xlabel)}</text>')
        if self.ylabel:
            out.append(f'<text x="14" y="{H / 2}" font-size="12" text-anchor="middle" '
                       f'font-family="sans-serif" transform="rotate(-90 14 {H / 2})">'
                       f'{escape(self.ylabel)}</text>')
        return out

    def render(self) -> str:
        m, W, H = self.margin, self.width, self.height
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
                f'viewBox="0 0 {W} {H}">')
        clip = (f'<defs><clipPath id="plot"><rect x="{m}" y="{m}" width="{W - 2 * m}" '
                f'height="{H - 2 * m}"/></clipPath></defs>')
        body = "\n".join(self._items)
        return "\n".join([head, '<rect width="100%" height="100%" fill="#ffffff"/>', clip,
                          *self._axes(), f'<g clip-path="url(#plot)">', body, "</g>", "</svg>"]) + "\n"

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.render())
