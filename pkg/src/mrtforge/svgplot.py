"""Predicted-vs-observed scatter plot as a standalone SVG."""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

from .metrics import MetricsReport, UndefinedMetric, compute_metrics

WIDTH = HEIGHT = 480
MARGIN = 60


def _ticks(lo, hi, n=5):
    step = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(step))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= step), default=step)
    start = math.ceil(lo / step) * step
    return [start + i * step for i in range(int((hi - start) / step + 1e-9) + 1)]


def annotation(report: MetricsReport) -> str:
    r2 = "n/a" if report.r2 is None else f"{report.r2:.2f}"
    return f"RMSE = {report.rmse:.2f} °C, R² = {r2}, n = {report.n}"


def scatter_svg(observed, predicted, title="Predicted vs observed T_mrt") -> str:
    """Scatter of ``predicted`` against ``observed`` with a 1:1 line and metrics."""
    y = np.asarray(observed, dtype=np.float64)
    yhat = np.asarray(predicted, dtype=np.float64)
    if y.size == 0:
        raise ValueError("no points to plot")
    try:
        report = compute_metrics(y, yhat)
    except UndefinedMetric as exc:
        report = exc.report
    lo = float(min(y.min(), yhat.min()))
    hi = float(max(y.max(), yhat.max()))
    pad = max(0.05 * (hi - lo), 0.5)
    lo, hi = lo - pad, hi + pad
    span = WIDTH - 2 * MARGIN

    def sx(v):
        return MARGIN + (v - lo) / (hi - lo) * span

    def sy(v):
        return HEIGHT - MARGIN - (v - lo) / (hi - lo) * span

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{span}" height="{span}" fill="none" stroke="black"/>',
    ]
    for t in _ticks(lo, hi):
        parts.append(f'<line x1="{sx(t):.2f}" y1="{HEIGHT - MARGIN}" x2="{sx(t):.2f}" '
                     f'y2="{HEIGHT - MARGIN + 5}" stroke="black"/>')
        parts.append(f'<text x="{sx(t):.2f}" y="{HEIGHT - MARGIN + 18}" '
                     f'text-anchor="middle">{t:g}</text>')
        parts.append(f'<line x1="{MARGIN - 5}" y1="{sy(t):.2f}" x2="{MARGIN}" y2="{sy(t):.2f}" '
                     f'stroke="black"/>')
        parts.append(f'<text x="{MARGIN - 8}" y="{sy(t) + 4:.2f}" text-anchor="end">{t:g}</text>')
    parts.append(f'<text x="{WIDTH / 2}" y="{HEIGHT - 15}" text-anchor="middle">'
                 f'Observed T_mrt (°C)</text>')
    parts.append(f'<text x="18" y="{HEIGHT / 2}" text-anchor="middle" '
                 f'transform="rotate(-90 18 {HEIGHT / 2})">Predicted T_mrt (°C)</text>')
    parts.append(f'<line class="identity" x1="{sx(lo):.2f}" y1="{sy(lo):.2f}" x2="{sx(hi):.2f}" '
                 f'y2="{sy(hi):.2f}" stroke="gray" stroke-dasharray="4 3"/>')
    parts.append('<g class="points" fill="steelblue" fill-opacity="0.6">')
    for a, b in zip(y, yhat):
        parts.append(f'<circle cx="{sx(a):.2f}" cy="{sy(b):.2f}" r="2.5"/>')
    parts.append('</g>')
    parts.append(f'<text class="metrics" x="{MARGIN + 8}" y="{MARGIN + 18}">'
                 f'{escape(annotation(report))}</text>')
    parts.append('</svg>')
    return "\n".join(parts) + "\n"
