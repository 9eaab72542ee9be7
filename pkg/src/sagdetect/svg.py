"""Static SVG line charts, written by hand so no plotting dependency is needed."""
from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 360
LEFT, RIGHT, TOP, BOTTOM = 70, 150, 40, 50
PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b")


def _fmt(v: float) -> str:
    return f"{v:.4g}"


def line_chart(series: Mapping[str, Sequence[float]], title: str = "", xlabel: str = "",
               ylabel: str = "", x0: float = 0.0) -> str:
    """One polyline per series, x = x0 + index; axes labelled with min/max."""
    names = list(series)
    values = [float(v) for name in names for v in series[name]]
    if not values:
        raise ValueError("nothing to plot")
    n = max(len(series[name]) for name in names)
    ymin, ymax = min(values), max(values)
    if ymax == ymin:
        ymax = ymin + 1.0
    plot_w = WIDTH - LEFT - RIGHT
    plot_h = HEIGHT - TOP - BOTTOM

    def px(i):
        return LEFT + (plot_w * i / (n - 1) if n > 1 else plot_w / 2)

    def py(v):
        return TOP + plot_h * (1 - (v - ymin) / (ymax - ymin))

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{LEFT}" y1="{TOP + plot_h}" x2="{LEFT + plot_w}" y2="{TOP + plot_h}" stroke="black"/>',
        f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{TOP + plot_h}" stroke="black"/>',
        f'<text x="{LEFT - 6}" y="{TOP + 4}" text-anchor="end">{_fmt(ymax)}</text>',
        f'<text x="{LEFT - 6}" y="{TOP + plot_h + 4}" text-anchor="end">{_fmt(ymin)}</text>',
        f'<text x="{LEFT}" y="{TOP + plot_h + 18}" text-anchor="middle">{_fmt(x0)}</text>',
        f'<text x="{LEFT + plot_w}" y="{TOP + plot_h + 18}" text-anchor="middle">{_fmt(x0 + n - 1)}</text>',
        f'<text x="{LEFT + plot_w / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="18" y="{TOP + plot_h / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 18 {TOP + plot_h / 2:.1f})">{escape(ylabel)}</text>',
    ]
    for k, name in enumerate(names):
        color = PALETTE[k % len(PALETTE)]
        pts = " ".join(f"{px(i):.2f},{py(float(v)):.2f}" for i, v in enumerate(series[name]))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = TOP + 16 * k + 6
        lx = LEFT + plot_w + 12
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 18}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 24}" y="{ly + 4}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_line_chart(path: str | Path, series: Mapping[str, Sequence[float]], **kwargs) -> None:
    Path(path).write_text(line_chart(series, **kwargs))
