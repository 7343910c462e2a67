"""SVG heatmaps of adjacency matrices with nodes reordered by cluster."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

from .core import NetworkSequence

PALETTE = ("#f7fbff", "#9ecae1", "#4292c6", "#08306b")


def _colors(C: int):
    if C <= len(PALETTE):
        return PALETTE[:C] if C == 4 else tuple(PALETTE[round(k * 3 / (C - 1))] for k in range(C))
    vals = np.linspace(247, 8, C).astype(int)
    return tuple(f"#{v:02x}{v:02x}{v:02x}" for v in vals)


def cluster_order(z) -> np.ndarray:
    """Stable permutation grouping nodes by label."""
    return np.argsort(np.asarray(z), kind="stable")


def adjacency_svg(net: NetworkSequence, x: int, z_rows=None, z_cols=None, cell: int = 6,
                  title: str | None = None) -> str:
    """Heatmap of index ``x`` with rows/columns grouped by the given labels."""
    n = net.n
    z_rows = np.zeros(n, dtype=int) if z_rows is None else np.asarray(z_rows)
    z_cols = z_rows if z_cols is None else np.asarray(z_cols)
    ro, co = cluster_order(z_rows), cluster_order(z_cols)
    y = net.y[x][np.ix_(ro, co)]
    colors = _colors(net.n_categories)
    margin, top = 10, 30
    size = n * cell
    width, height = size + 2 * margin, size + top + margin + 20
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    label = title if title is not None else f"index {net.labels[x]}"
    out.append(f'<text x="{margin}" y="18" font-family="sans-serif" font-size="12">{escape(label)}</text>')
    out.append(f'<g transform="translate({margin},{top})" shape-rendering="crispEdges">')
    for i in range(n):
        for j in range(n):
            c = colors[int(y[i, j]) - 1]
            out.append(f'<rect x="{j * cell}" y="{i * cell}" width="{cell}" height="{cell}" fill="{c}"/>')
    zr, zc = z_rows[ro], z_cols[co]
    for i in np.flatnonzero(zr[1:] != zr[:-1]) + 1:
        out.append(f'<line x1="0" y1="{i * cell}" x2="{size}" y2="{i * cell}" stroke="#d62728" stroke-width="1"/>')
    for j in np.flatnonzero(zc[1:] != zc[:-1]) + 1:
        out.append(f'<line x1="{j * cell}" y1="0" x2="{j * cell}" y2="{size}" stroke="#d62728" stroke-width="1"/>')
    out.append(f'<rect x="0" y="0" width="{size}" height="{size}" fill="none" stroke="black"/>')
    out.append("</g>")
    lx = margin
    for k, c in enumerate(colors):
        out.append(f'<rect x="{lx}" y="{top + size + 6}" width="10" height="10" fill="{c}" stroke="black"/>')
        out.append(f'<text x="{lx + 13}" y="{top + size + 15}" font-family="sans-serif" font-size="9">{k + 1}</text>')
        lx += 30
    out.append("</svg>")
    return "\n".join(out) + "\n"
