"""Contact-sheet renderer: rows of equally sized images tiled with 2 px
white gutters inside a 2 px border, the repo's stand-in for side-by-side
result figures."""

from __future__ import annotations

import numpy as np

__all__ = ["render_contact_sheet", "GUTTER", "BORDER"]

GUTTER = 2
BORDER = 2


def render_contact_sheet(rows: list[list[np.ndarray]], gutter: int = GUTTER,
                         border: int = BORDER) -> np.ndarray:
    """Tile H×W×3 uint8 images; canvas width follows the longest row.

    Canvas size is exactly
    ``2·border + cols·w + (cols−1)·gutter`` by
    ``2·border + rows·h + (rows−1)·gutter``.
    """
    if not rows or not any(rows):
        raise ValueError("contact sheet needs at least one image")
    cells = [img for row in rows for img in row]
    h, w = cells[0].shape[:2]
    for img in cells:
        if img.shape[:2] != (h, w):
            raise ValueError(
                f"mixed image sizes: {img.shape[:2]} vs {(h, w)}"
            )
    n_rows = len(rows)
    n_cols = max(len(r) for r in rows)
    width = 2 * border + n_cols * w + (n_cols - 1) * gutter
    height = 2 * border + n_rows * h + (n_rows - 1) * gutter
    canvas = np.full((height, width, 3), 255, dtype=np.uint8)
    for r, row in enumerate(rows):
        for c, img in enumerate(row):
            y = border + r * (h + gutter)
            x = border + c * (w + gutter)
            canvas[y:y + h, x:x + w] = img
    return canvas
