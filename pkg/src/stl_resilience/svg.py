"""Minimal deterministic SVG 1.1 line plots: one panel per state, one polyline per curve."""
from __future__ import annotations

from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


@dataclass(frozen=True)
class Curve:
    label: str
    t: np.ndarray
    y: np.ndarray
    color: str = "#1f77b4"
    width: float = 1.2
    dash: str | None = None
    opacity: float = 1.0


@dataclass(frozen=True)
class Panel:
    title: str
    curves: tuple


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _ticks(lo, hi, count=5):
    return [lo + (hi - lo) * i / (count - 1) for i in range(count)]


def _limits(values):
    lo, hi = float(np.min(values)), float(np.max(values))
    if not np.isfinite(lo) or not np.isfinite(hi):
        raise ValueError("cannot plot non-finite values")
    pad = 0.05 * (hi - lo) if hi > lo else max(abs(lo), 1.0) * 0.05
    return lo - pad, hi + pad


def render(panels, width: int = 720, panel_height: int = 240, title: str = "") -> str:
    """Stack ``panels`` vertically. Output bytes depend only on the inputs."""
    margin_l, margin_r, margin_t, margin_b = 70, 150, 30, 30
    top = 30 if title else 0
    height = top + len(panels) * (panel_height + margin_t + margin_b)
    plot_w = width - margin_l - margin_r
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="14">{escape(title)}</text>')
    for p, panel in enumerate(panels):
        y0 = top + p * (panel_height + margin_t + margin_b) + margin_t
        t_all = np.concatenate([np.asarray(c.t, float) for c in panel.curves])
        y_all = np.concatenate([np.asarray(c.y, float) for c in panel.curves])
        t_lo, t_hi = float(t_all.min()), float(t_all.max())
        if t_hi == t_lo:
            t_hi = t_lo + 1.0
        y_lo, y_hi = _limits(y_all)

        def sx(t):
            return margin_l + (np.asarray(t, float) - t_lo) / (t_hi - t_lo) * plot_w

        def sy(y):
            return y0 + panel_height - (np.asarray(y, float) - y_lo) / (y_hi - y_lo) * panel_height

        out.append(f'<g id="panel{p}">')
        out.append(f'<rect x="{margin_l}" y="{y0}" width="{plot_w}" height="{panel_height}" '
                   'fill="none" stroke="#444" stroke-width="1"/>')
        out.append(f'<text x="{margin_l}" y="{y0 - 8}" font-family="sans-serif" '
                   f'font-size="12">{escape(panel.title)}</text>')
        for tv in _ticks(t_lo, t_hi):
            x = _fmt(float(sx(tv)))
            out.append(f'<text x="{x}" y="{y0 + panel_height + 16}" text-anchor="middle" '
                       f'font-family="sans-serif" font-size="10">{tv:.4g}</text>')
        for yv in _ticks(y_lo, y_hi):
            y = _fmt(float(sy(yv)))
            out.append(f'<text x="{margin_l - 6}" y="{y}" text-anchor="end" '
                       f'font-family="sans-serif" font-size="10">{yv:.4g}</text>')
        legend = []
        for c in panel.curves:
            xs, ys = sx(c.t), sy(c.y)
            points = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(xs, ys))
            attrs = f'fill="none" stroke="{c.color}" stroke-width="{c.width}"'
            if c.dash:
                attrs += f' stroke-dasharray="{c.dash}"'
            if c.opacity < 1:
                attrs += f' stroke-opacity="{c.opacity:.3g}"'
            out.append(f'<polyline {attrs} points="{points}"/>')
            if c.label and c.label not in legend:
                legend.append(c.label)
                ly = y0 + 14 * len(legend)
                out.append(f'<text x="{width - margin_r + 10}" y="{ly}" fill="{c.color}" '
                           f'font-family="sans-serif" font-size="10">{escape(c.label)}</text>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
