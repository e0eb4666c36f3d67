"""Minimal deterministic SVG emitter for curves, circles and polygons."""
from __future__ import annotations

from pathlib import Path
from typing import Sequence, Tuple

import numpy as np

from .curve import Polyline
from .errors import ValidationError

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _num(v: float) -> str:
    return format(float(v), ".6f").rstrip("0").rstrip(".") or "0"


def render_svg(curves: Sequence[Polyline] = (),
               circles: Sequence[Tuple[Tuple[float, float], float]] = (),
               polygons: Sequence[np.ndarray] = (), size: int = 600,
               margin: float = 0.05) -> str:
    """SVG text with one uniform scale for every drawable.

    Output depends only on the inputs, so equal inputs give equal bytes.
    """
    if not curves and not circles and not polygons:
        raise ValidationError("nothing to draw")
    boxes = []
    for c in curves:
        boxes.append(c.points)
    for (cx, cy), r in circles:
        if not r > 0:
            raise ValidationError("circle radius must be positive")
        boxes.append(np.array([[cx - r, cy - r], [cx + r, cy + r]]))
    for p in polygons:
        boxes.append(np.asarray(p, dtype=float))
    allp = np.vstack(boxes)
    lo, hi = allp.min(axis=0), allp.max(axis=0)
    span = float(max(hi - lo)) or 1.0
    pad = margin * span
    lo = lo - pad
    scale = size / (span + 2 * pad)

    def tx(p):
        # flip y so the picture has the usual orientation
        return (p[..., 0] - lo[0]) * scale, size - (p[..., 1] - lo[1]) * scale

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
           f'viewBox="0 0 {size} {size}">',
           f'<rect x="0" y="0" width="{size}" height="{size}" fill="white"/>']
    for p in polygons:
        x, y = tx(np.asarray(p, dtype=float))
        pts = " ".join(f"{_num(a)},{_num(b)}" for a, b in zip(x, y))
        out.append(f'<polygon points="{pts}" fill="none" stroke="#888888" stroke-width="0.6"/>')
    for (cx, cy), r in circles:
        x, y = tx(np.array([cx, cy], dtype=float))
        out.append(f'<circle cx="{_num(x)}" cy="{_num(y)}" r="{_num(r * scale)}" '
                   f'fill="none" stroke="#888888" stroke-width="0.8"/>')
    for k, c in enumerate(curves):
        x, y = tx(c.points)
        pts = " ".join(f"{_num(a)},{_num(b)}" for a, b in zip(x, y))
        out.append(f'<polyline points="{pts}" fill="none" '
                   f'stroke="{PALETTE[k % len(PALETTE)]}" stroke-width="1"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_svg(curves: Sequence[Polyline], circles: Sequence = (), path=None,
             polygons: Sequence[np.ndarray] = (), size: int = 600) -> str:
    """Render and, when ``path`` is given, write the SVG file."""
    text = render_svg(curves, circles, polygons, size)
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text
