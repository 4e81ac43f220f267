"""Tiny deterministic SVG line plots.

Byte-identical output across runs is a hard requirement for the scenario
artifacts, so the figures are assembled from fixed-format primitives rather
than going through a plotting library (which embeds dates and hashed ids).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
           "#8c564b", "#17becf", "#7f7f7f")


def _fmt(v: float) -> str:
    return f"{v:.3f}"


@dataclass
class SvgFigure:
    title: str
    x_label: str = ""
    y_label: str = ""
    width: int = 720
    height: int = 480
    margin: int = 64
    _series: list = field(default_factory=list)
    _bands: list = field(default_factory=list)
    _markers: list = field(default_factory=list)

    def add_line(self, xs, ys, label: str = "", color: str | None = None,
                 dash: bool = False) -> None:
        pts = [(float(x), float(y)) for x, y in zip(xs, ys)
               if math.isfinite(float(x)) and math.isfinite(float(y))]
        if len(pts) >= 2:
            color = color or PALETTE[len(self._series) % len(PALETTE)]
            self._series.append((pts, label, color, dash))

    def add_band(self, x_lo: float, x_hi: float,
                 color: str = "#fdd0a2") -> None:
        self._bands.append((float(x_lo), float(x_hi), color))

    def add_marker(self, x: float, y: float, color: str = "#000000") -> None:
        if math.isfinite(float(x)) and math.isfinite(float(y)):
            self._markers.append((float(x), float(y), color))

    def _bounds(self):
        xs = [p[0] for pts, *_ in self._series for p in pts]
        ys = [p[1] for pts, *_ in self._series for p in pts]
        xs += [b[0] for b in self._bands] + [b[1] for b in self._bands]
        xs += [m[0] for m in self._markers]
        ys += [m[1] for m in self._markers]
        if not xs or not ys:
            return (0.0, 1.0, 0.0, 1.0)
        x_lo, x_hi = min(xs), max(xs)
        y_lo, y_hi = min(ys), max(ys)
        if x_hi == x_lo:
            x_hi = x_lo + 1.0
        if y_hi == y_lo:
            y_hi = y_lo + 1.0
        pad_y = 0.05 * (y_hi - y_lo)
        return (x_lo, x_hi, y_lo - pad_y, y_hi + pad_y)

    def render(self) -> str:
        x_lo, x_hi, y_lo, y_hi = self._bounds()
        m, w, h = self.margin, self.width, self.height
        plot_w, plot_h = w - 2 * m, h - 2 * m

        def sx(x: float) -> float:
            return m + (x - x_lo) / (x_hi - x_lo) * plot_w

        def sy(y: float) -> float:
            return h - m - (y - y_lo) / (y_hi - y_lo) * plot_h

        out = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" '
            f'height="{h}" viewBox="0 0 {w} {h}">',
            f'<rect width="{w}" height="{h}" fill="#ffffff"/>',
            f'<text x="{w // 2}" y="28" text-anchor="middle" '
            f'font-family="monospace" font-size="15">{self.title}</text>',
        ]
        for lo, hi, color in self._bands:
            out.append(
                f'<rect x="{_fmt(sx(lo))}" y="{m}" '
                f'width="{_fmt(max(sx(hi) - sx(lo), 0.5))}" '
                f'height="{plot_h}" fill="{color}" fill-opacity="0.45"/>')
        out.append(
            f'<rect x="{m}" y="{m}" width="{plot_w}" height="{plot_h}" '
            f'fill="none" stroke="#000000"/>')

        for i in range(5):
            fx = x_lo + (x_hi - x_lo) * i / 4
            fy = y_lo + (y_hi - y_lo) * i / 4
            px, py = sx(fx), sy(fy)
            out.append(f'<line x1="{_fmt(px)}" y1="{h - m}" x2="{_fmt(px)}" '
                       f'y2="{h - m + 5}" stroke="#000000"/>')
            out.append(f'<text x="{_fmt(px)}" y="{h - m + 20}" '
                       f'text-anchor="middle" font-family="monospace" '
                       f'font-size="11">{fx:.3g}</text>')
            out.append(f'<line x1="{m - 5}" y1="{_fmt(py)}" x2="{m}" '
                       f'y2="{_fmt(py)}" stroke="#000000"/>')
            out.append(f'<text x="{m - 8}" y="{_fmt(py + 4)}" '
                       f'text-anchor="end" font-family="monospace" '
                       f'font-size="11">{fy:.3g}</text>')
        if self.x_label:
            out.append(f'<text x="{w // 2}" y="{h - 12}" text-anchor="middle" '
                       f'font-family="monospace" font-size="12">'
                       f'{self.x_label}</text>')
        if self.y_label:
            out.append(f'<text x="16" y="{h // 2}" text-anchor="middle" '
                       f'font-family="monospace" font-size="12" '
                       f'transform="rotate(-90 16 {h // 2})">'
                       f'{self.y_label}</text>')

        for pts, label, color, dash in self._series:
            path = " ".join(
                ("M" if i == 0 else "L") + f"{_fmt(sx(x))},{_fmt(sy(y))}"
                for i, (x, y) in enumerate(pts))
            dash_attr = ' stroke-dasharray="6,4"' if dash else ""
            out.append(f'<path d="{path}" fill="none" stroke="{color}" '
                       f'stroke-width="1.5"{dash_attr}/>')
        for x, y, color in self._markers:
            out.append(f'<circle cx="{_fmt(sx(x))}" cy="{_fmt(sy(y))}" '
                       f'r="3.5" fill="{color}"/>')
        for i, (_, label, color, _) in enumerate(s for s in self._series
                                                 if s[1]):
            out.append(f'<text x="{w - m - 4}" y="{m + 16 + 15 * i}" '
                       f'text-anchor="end" font-family="monospace" '
                       f'font-size="11" fill="{color}">{label}</text>')
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def save(self, path) -> None:
        with open(path, "w", encoding="ascii") as fh:
            fh.write(self.render())
