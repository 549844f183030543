"""Minimal SVG line-plot emitter for training curves (human inspection only)."""

from __future__ import annotations

WIDTH, HEIGHT = 640, 400
MARGIN = 50

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def curve_svg(
    series: dict[str, list[tuple[float, float]]],
    title: str = "",
    mark_x: float | None = None,
) -> str:
    """Polyline plot of named (x, y) series; ``mark_x`` draws a vertical marker."""
    points = [p for pts in series.values() for p in pts]
    if not points:
        return f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}"/>'
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(0.0, min(ys)), max(1.0, max(ys))
    if x1 == x0:
        x1 = x0 + 1.0

    def sx(x: float) -> float:
        return MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2 * MARGIN)

    def sy(y: float) -> float:
        return HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2 * MARGIN)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" '
        f'y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" '
        f'y2="{HEIGHT - MARGIN}" stroke="black"/>',
    ]
    for i in range(5):
        yv = y0 + (y1 - y0) * i / 4
        parts.append(
            f'<text x="5" y="{sy(yv) + 4:.1f}" font-size="11">{yv:.2f}</text>'
        )
        xv = x0 + (x1 - x0) * i / 4
        parts.append(
            f'<text x="{sx(xv) - 8:.1f}" y="{HEIGHT - MARGIN + 16}" '
            f'font-size="11">{xv:.0f}</text>'
        )
    if title:
        parts.append(
            f'<text x="{WIDTH / 2:.0f}" y="20" font-size="14" '
            f'text-anchor="middle">{title}</text>'
        )
    if mark_x is not None and x0 <= mark_x <= x1:
        parts.append(
            f'<line x1="{sx(mark_x):.1f}" y1="{MARGIN}" x2="{sx(mark_x):.1f}" '
            f'y2="{HEIGHT - MARGIN}" stroke="gray" stroke-dasharray="4 3"/>'
        )
    for i, (name, pts) in enumerate(series.items()):
        color = _COLORS[i % len(_COLORS)]
        coords = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in pts)
        parts.append(
            f'<polyline points="{coords}" fill="none" stroke="{color}" '
            f'stroke-width="1.5"/>'
        )
        parts.append(
            f'<text x="{WIDTH - MARGIN + 4}" y="{MARGIN + 16 * i + 10}" '
            f'font-size="11" fill="{color}">{name}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
