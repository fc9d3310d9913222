"""Single-file SVG heatmap writer, no plotting dependencies."""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np


def _colour(t: float) -> str:
    # blue -> white -> red
    t = min(max(t, 0.0), 1.0)
    if t < 0.5:
        u = t / 0.5
        r, g, b = int(255 * u), int(255 * u), 255
    else:
        u = (t - 0.5) / 0.5
        r, g, b = 255, int(255 * (1 - u)), int(255 * (1 - u))
    return f"#{r:02x}{g:02x}{b:02x}"


def heatmap_svg(x: Sequence[float], y: Sequence[float], z: np.ndarray, title: str = "",
                xlabel: str = "Pi", ylabel: str = "K", cell: int = 8) -> str:
    """Render ``z[y_index, x_index]`` as an SVG string. NaNs are drawn grey."""
    z = np.asarray(z, dtype=float)
    ny, nx = z.shape
    finite = z[np.isfinite(z)]
    lo, hi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    span = hi - lo or 1.0
    left, top = 60, 30
    width, height = left + nx * cell + 20, top + ny * cell + 50
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
           f'<text x="{left}" y="18" font-size="12">{title} [{lo:.4g}, {hi:.4g}]</text>']
    for i in range(ny):
        for j in range(nx):
            v = z[i, j]
            fill = "#999999" if not math.isfinite(v) else _colour((v - lo) / span)
            # K grows upward
            yy = top + (ny - 1 - i) * cell
            out.append(f'<rect x="{left + j * cell}" y="{yy}" width="{cell}" '
                       f'height="{cell}" fill="{fill}"/>')
    base = top + ny * cell
    out.append(f'<text x="{left}" y="{base + 15}" font-size="10">{x[0]:.3g}</text>')
    out.append(f'<text x="{left + nx * cell - 20}" y="{base + 15}" font-size="10">{x[-1]:.3g}</text>')
    out.append(f'<text x="{left + nx * cell // 2}" y="{base + 35}" font-size="12">{xlabel}</text>')
    out.append(f'<text x="5" y="{base}" font-size="10">{y[0]:.3g}</text>')
    out.append(f'<text x="5" y="{top + 10}" font-size="10">{y[-1]:.3g}</text>')
    out.append(f'<text x="5" y="{top + ny * cell // 2}" font-size="12">{ylabel}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
