"""SVG figure: |alpha|_h heatmap on both charts with skeleton arcs and loops.

Presentation only; the JSON and CSV reports are the data contract.
"""

from __future__ import annotations

import numpy as np

from .sections import BinaryForm, log_norm
from .sphere import Chart, SpherePoint

WIDTH = HEIGHT = 800
PANEL = 400
WINDOW = 1.25  # each panel shows |coord| <= WINDOW along both axes
CELLS = 50


def _color(t: float) -> str:
    """Dark blue (small norm) to pale yellow (large norm) for ``t`` in [0, 1]."""
    lo = np.array([20, 30, 90])
    hi = np.array([250, 235, 160])
    r, g, b = (lo + (hi - lo) * float(np.clip(t, 0.0, 1.0))).astype(int)
    return f"#{r:02x}{g:02x}{b:02x}"


def _panel_origin(chart: Chart) -> tuple[float, float]:
    return (0.0 if chart is Chart.AFFINE0 else float(PANEL), (HEIGHT - PANEL) / 2)


def _to_pixel(chart: Chart, c: complex) -> tuple[float, float]:
    x0, y0 = _panel_origin(chart)
    x = x0 + (c.real + WINDOW) / (2 * WINDOW) * PANEL
    y = y0 + (WINDOW - c.imag) / (2 * WINDOW) * PANEL
    return x, y


def _visible(c: complex) -> bool:
    return abs(c.real) <= WINDOW and abs(c.imag) <= WINDOW


def _heatmap(form: BinaryForm, chart: Chart) -> list[str]:
    a = form.chart_coefficients(chart)
    step = 2 * WINDOW / CELLS
    centers = -WINDOW + step * (np.arange(CELLS) + 0.5)
    zz = centers[None, :] + 1j * centers[::-1, None]
    vals = np.exp(log_norm(a, form.degree, zz))
    vmax = float(np.max(vals)) or 1.0
    x0, y0 = _panel_origin(chart)
    px = PANEL / CELLS
    out = []
    for i in range(CELLS):
        for j in range(CELLS):
            out.append(
                f'<rect x="{x0 + j * px:.2f}" y="{y0 + i * px:.2f}" width="{px:.2f}" '
                f'height="{px:.2f}" fill="{_color(vals[i, j] / vmax)}"/>'
            )
    return out


def _polylines(points: list[SpherePoint], chart: Chart, closed: bool) -> list[list[tuple[float, float]]]:
    """Pieces of the curve visible in ``chart``'s window."""
    pts = list(points) + ([points[0]] if closed else [])
    pieces, cur = [], []
    for p in pts:
        c = p.in_chart(chart)
        if _visible(c):
            cur.append(_to_pixel(chart, c))
        elif cur:
            pieces.append(cur)
            cur = []
    if cur:
        pieces.append(cur)
    return [pc for pc in pieces if len(pc) > 1]


def _path(pixels, stroke: str, width: float) -> str:
    d = " ".join(f"{x:.2f},{y:.2f}" for x, y in pixels)
    return f'<polyline points="{d}" fill="none" stroke="{stroke}" stroke-width="{width}"/>'


def render(
    form: BinaryForm,
    arcs: list[list[SpherePoint]] = (),
    loops: list[list[SpherePoint]] = (),
    markers: list[SpherePoint] = (),
    title: str = "",
) -> str:
    """Full SVG document (800x800; chart z on the left, chart w on the right)."""
    body = [f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>']
    for chart in Chart:
        body.extend(_heatmap(form, chart))
        x0, y0 = _panel_origin(chart)
        label = "z = z1/z0" if chart is Chart.AFFINE0 else "w = z0/z1"
        body.append(f'<text x="{x0 + 10}" y="{y0 - 10}" font-size="16">{label}</text>')
        for pts in arcs:
            body.extend(_path(px, "#d62728", 2.0) for px in _polylines(pts, chart, False))
        for pts in loops:
            body.extend(_path(px, "#2ca02c", 2.0) for px in _polylines(pts, chart, True))
        for p in markers:
            c = p.in_chart(chart)
            if _visible(c):
                x, y = _to_pixel(chart, c)
                body.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="3" fill="black"/>')
    if title:
        body.append(f'<text x="10" y="40" font-size="18">{title}</text>')
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">\n' + "\n".join(body) + "\n</svg>\n"
    )
