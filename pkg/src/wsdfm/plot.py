"""Dependency-free SVG scatter panels for two-token grid datasets."""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

from .core import Dataset, InvalidArgument, RngStream

MAX_POINTS = 5000
PANEL = 320
MARGIN = 24


def subsample(data: Dataset, cap: int = MAX_POINTS, seed: int = 0) -> np.ndarray:
    """At most ``cap`` rows, chosen by a fixed-seed permutation (order preserved)."""
    tokens = data.tokens
    if len(tokens) <= cap:
        return tokens
    keep = np.sort(RngStream(seed, "plot").generator().permutation(len(tokens))[:cap])
    return tokens[keep]


def scatter_svg(panels: list[tuple[str, Dataset]], cap: int = MAX_POINTS) -> str:
    """Side-by-side scatter panels, one ``<circle>`` per plotted point."""
    if not panels:
        raise InvalidArgument("nothing to plot")
    for _, data in panels:
        if data.spec.n_tokens != 2:
            raise InvalidArgument("scatter plots need two-token sequences")
    width = len(panels) * (PANEL + MARGIN) + MARGIN
    height = PANEL + 2 * MARGIN
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>']
    for p, (title, data) in enumerate(panels):
        x0 = MARGIN + p * (PANEL + MARGIN)
        scale = PANEL / data.spec.vocab
        out.append(f'<g transform="translate({x0},{MARGIN})">')
        out.append(f'<rect width="{PANEL}" height="{PANEL}" fill="none" stroke="#888"/>')
        out.append(f'<text x="{PANEL / 2}" y="-8" font-size="12" text-anchor="middle" '
                   f'font-family="sans-serif">{escape(title)}</text>')
        for a, b in subsample(data, cap):
            cx = (a + 0.5) * scale
            cy = PANEL - (b + 0.5) * scale
            out.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="1.2" fill="#1f5fa8" '
                       f'fill-opacity="0.5"/>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
