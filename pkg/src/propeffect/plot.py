"""Minimal dependency-free SVG line charts for behavior curves."""
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def line_chart_svg(x, curves: dict, threshold=None, width=480, height=320, xlabel="property", ylabel="output") -> str:
    """Render ``curves`` (label -> y values over ``x``) as an SVG document string."""
    x = np.asarray(x, dtype=np.float64)
    ys = [np.asarray(v, dtype=np.float64) for v in curves.values()]
    left, right, top, bottom = 56, 120, 16, 44
    pw, ph = width - left - right, height - top - bottom
    lo = min([float(y.min()) for y in ys] + ([threshold] if threshold is not None else []))
    hi = max([float(y.max()) for y in ys] + ([threshold] if threshold is not None else []))
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    x0, x1 = float(x.min()), float(x.max())
    if x1 == x0:
        x1 = x0 + 1.0

    def px(v):
        return left + (v - x0) / (x1 - x0) * pw

    def py(v):
        return top + (hi - v) / (hi - lo) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="white" stroke="black"/>',
    ]
    for v in (lo, hi):
        out.append(f'<text x="{left - 4}" y="{py(v):.1f}" font-size="10" text-anchor="end">{v:.3g}</text>')
    for v in (x0, x1):
        out.append(f'<text x="{px(v):.1f}" y="{top + ph + 14}" font-size="10" text-anchor="middle">{v:.3g}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 8}" font-size="11" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(
        f'<text x="14" y="{top + ph / 2:.1f}" font-size="11" text-anchor="middle" '
        f'transform="rotate(-90 14 {top + ph / 2:.1f})">{escape(ylabel)}</text>'
    )
    if threshold is not None:
        out.append(
            f'<line x1="{left}" x2="{left + pw}" y1="{py(threshold):.1f}" y2="{py(threshold):.1f}" '
            'stroke="red" stroke-dasharray="4 3"/>'
        )
    for k, (label, y) in enumerate(zip(curves, ys)):
        color = PALETTE[k % len(PALETTE)]
        pts = " ".join(f"{px(a):.1f},{py(b):.1f}" for a, b in zip(x, y))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = top + 12 + 14 * k
        out.append(f'<line x1="{left + pw + 8}" x2="{left + pw + 24}" y1="{ly - 4}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 28}" y="{ly}" font-size="10">{escape(str(label))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
