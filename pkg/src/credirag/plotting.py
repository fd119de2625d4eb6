"""Minimal SVG line charts for ROC and calibration curves."""

from __future__ import annotations

from typing import Sequence
from xml.sax.saxutils import escape

_SIZE = 360
_PAD = 48
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def _xy(x: float, y: float) -> tuple[float, float]:
    span = _SIZE - 2 * _PAD
    return _PAD + x * span, _SIZE - _PAD - y * span


def _path(points: Sequence[tuple[float, float]]) -> str:
    parts = []
    for i, (x, y) in enumerate(points):
        px, py = _xy(x, y)
        parts.append(f"{'M' if i == 0 else 'L'}{px:.2f},{py:.2f}")
    return " ".join(parts)


def line_chart(series: dict[str, Sequence[tuple[float, float]]], title: str,
               xlabel: str, ylabel: str, diagonal: bool = True) -> str:
    """Unit-square chart with one polyline per named series."""
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SIZE}" height="{_SIZE}" '
           f'viewBox="0 0 {_SIZE} {_SIZE}" font-family="sans-serif" font-size="11">',
           f'<rect width="{_SIZE}" height="{_SIZE}" fill="white"/>',
           f'<path d="{_path([(0, 0), (1, 0), (1, 1), (0, 1), (0, 0)])}" fill="none" stroke="#444"/>']
    for tick in (0.0, 0.5, 1.0):
        x, y = _xy(tick, 0)
        out.append(f'<text x="{x:.2f}" y="{y + 14:.2f}" text-anchor="middle">{tick:g}</text>')
        x, y = _xy(0, tick)
        out.append(f'<text x="{x - 6:.2f}" y="{y + 4:.2f}" text-anchor="end">{tick:g}</text>')
    if diagonal:
        out.append(f'<path d="{_path([(0, 0), (1, 1)])}" fill="none" stroke="#999" stroke-dasharray="4 3"/>')
    for k, (name, pts) in enumerate(series.items()):
        color = _COLORS[k % len(_COLORS)]
        if pts:
            out.append(f'<path d="{_path(pts)}" fill="none" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{_PAD + 8}" y="{_PAD + 14 + 14 * k}" fill="{color}">{escape(name)}</text>')
    out.append(f'<text x="{_SIZE / 2:.1f}" y="{_PAD / 2:.1f}" text-anchor="middle" font-size="13">{escape(title)}</text>')
    out.append(f'<text x="{_SIZE / 2:.1f}" y="{_SIZE - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="14" y="{_SIZE / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 14 {_SIZE / 2:.1f})">{escape(ylabel)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def roc_svg(curves: dict[str, tuple[Sequence[float], Sequence[float]]]) -> str:
    series = {name: list(zip(fpr, tpr)) for name, (fpr, tpr) in curves.items()}
    return line_chart(series, "ROC", "false positive rate", "true positive rate")


def calibration_svg(curves: dict[str, tuple[Sequence[float], Sequence[float]]]) -> str:
    series = {name: list(zip(mp, fr)) for name, (mp, fr) in curves.items()}
    return line_chart(series, "Calibration", "mean predicted P(real)", "fraction real")
