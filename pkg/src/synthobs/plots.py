"""Self-contained heatmap rendering (numpy raster + bundled 5x7 font).

No plotting library: cells are filled rectangles, labels come from a tiny
bitmap font, and the PNG bytes are stable across runs for fixed inputs.
"""

from __future__ import annotations

import numpy as np

from . import pngio

# 5x7 glyphs, one string per row, '1' = lit. Text is uppercased on render.
_GLYPHS = {
    "A": ("01110", "10001", "10001", "11111", "10001", "10001", "10001"),
    "B": ("11110", "10001", "10001", "11110", "10001", "10001", "11110"),
    "C": ("01110", "10001", "10000", "10000", "10000", "10001", "01110"),
    "D": ("11110", "10001", "10001", "10001", "10001", "10001", "11110"),
    "E": ("11111", "10000", "10000", "11110", "10000", "10000", "11111"),
    "F": ("11111", "10000", "10000", "11110", "10000", "10000", "10000"),
    "G": ("01110", "10001", "10000", "10111", "10001", "10001", "01111"),
    "H": ("10001", "10001", "10001", "11111", "10001", "10001", "10001"),
    "I": ("01110", "00100", "00100", "00100", "00100", "00100", "01110"),
    "J": ("00111", "00010", "00010", "00010", "00010", "10010", "01100"),
    "K": ("10001", "10010", "10100", "11000", "10100", "10010", "10001"),
    "L": ("10000", "10000", "10000", "10000", "10000", "10000", "11111"),
    "M": ("10001", "11011", "10101", "10101", "10001", "10001", "10001"),
    "N": ("10001", "10001", "11001", "10101", "10011", "10001", "10001"),
    "O": ("01110", "10001", "10001", "10001", "10001", "10001", "01110"),
    "P": ("11110", "10001", "10001", "11110", "10000", "10000", "10000"),
    "Q": ("01110", "10001", "10001", "10001", "10101", "10010", "01101"),
    "R": ("11110", "10001", "10001", "11110", "10100", "10010", "10001"),
    "S": ("01111", "10000", "10000", "01110", "00001", "00001", "11110"),
    "T": ("11111", "00100", "00100", "00100", "00100", "00100", "00100"),
    "U": ("10001", "10001", "10001", "10001", "10001", "10001", "01110"),
    "V": ("10001", "10001", "10001", "10001", "10001", "01010", "00100"),
    "W": ("10001", "10001", "10001", "10101", "10101", "10101", "01010"),
    "X": ("10001", "01010", "00100", "00100", "00100", "01010", "10001"),
    "Y": ("10001", "10001", "01010", "00100", "00100", "00100", "00100"),
    "Z": ("11111", "00001", "00010", "00100", "01000", "10000", "11111"),
    "0": ("01110", "10001", "10011", "10101", "11001", "10001", "01110"),
    "1": ("00100", "01100", "00100", "00100", "00100", "00100", "01110"),
    "2": ("01110", "10001", "00001", "00010", "00100", "01000", "11111"),
    "3": ("11111", "00010", "00100", "00010", "00001", "10001", "01110"),
    "4": ("00010", "00110", "01010", "10010", "11111", "00010", "00010"),
    "5": ("11111", "10000", "11110", "00001", "00001", "10001", "01110"),
    "6": ("00110", "01000", "10000", "11110", "10001", "10001", "01110"),
    "7": ("11111", "00001", "00010", "00100", "01000", "01000", "01000"),
    "8": ("01110", "10001", "10001", "01110", "10001", "10001", "01110"),
    "9": ("01110", "10001", "10001", "01111", "00001", "00010", "01100"),
    "-": ("00000", "00000", "00000", "11111", "00000", "00000", "00000"),
    ".": ("00000", "00000", "00000", "00000", "00000", "00110", "00110"),
    "%": ("11001", "11010", "00010", "00100", "01000", "01011", "10011"),
    " ": ("00000", "00000", "00000", "00000", "00000", "00000", "00000"),
}
_UNKNOWN = ("11111", "10001", "10001", "10001", "10001", "10001", "11111")

GLYPH_H, GLYPH_W = 7, 5
_CHAR_PITCH = GLYPH_W + 1

# dark-to-bright ramp anchors for rates in [0, 1]
_RAMP = np.array([[12, 12, 46], [118, 32, 108], [218, 86, 36], [250, 230, 120]], dtype=np.float64)


def ramp_color(v: float) -> np.ndarray:
    v = min(max(float(v), 0.0), 1.0)
    pos = v * (len(_RAMP) - 1)
    i = min(int(pos), len(_RAMP) - 2)
    frac = pos - i
    return np.round(_RAMP[i] * (1 - frac) + _RAMP[i + 1] * frac).astype(np.uint8)


def text_bitmap(text: str) -> np.ndarray:
    """Boolean (7, 6*len) raster of the text."""
    text = text.upper()
    out = np.zeros((GLYPH_H, max(_CHAR_PITCH * len(text), 1)), dtype=bool)
    for k, ch in enumerate(text):
        glyph = _GLYPHS.get(ch, _UNKNOWN)
        for r, row in enumerate(glyph):
            for c, bit in enumerate(row):
                if bit == "1":
                    out[r, k * _CHAR_PITCH + c] = True
    return out


def _blit_text(canvas: np.ndarray, text: str, top: int, left: int, rotate: bool = False) -> None:
    bm = text_bitmap(text)
    if rotate:
        bm = np.rot90(bm)  # reads bottom-to-top
    h, w = bm.shape
    h = min(h, canvas.shape[0] - top)
    w = min(w, canvas.shape[1] - left)
    if h <= 0 or w <= 0:
        return
    region = canvas[top : top + h, left : left + w]
    region[bm[:h, :w]] = np.array([20, 20, 20], dtype=np.uint8)


def heatmap(
    values: np.ndarray,
    row_labels: list[str],
    col_labels: list[str],
    path,
    cell: int = 22,
    max_label: int = 16,
) -> None:
    """Shaded-cell heatmap PNG with labeled axes."""
    values = np.asarray(values, dtype=np.float64)
    n_rows, n_cols = values.shape
    rows = [lbl[:max_label] for lbl in row_labels]
    cols = [lbl[:max_label] for lbl in col_labels]
    left = max((len(lbl) for lbl in rows), default=1) * _CHAR_PITCH + 6
    top = max((len(lbl) for lbl in cols), default=1) * _CHAR_PITCH + 6
    height = top + n_rows * cell + 4
    width = left + n_cols * cell + 4
    canvas = np.full((height, width, 3), 245, dtype=np.uint8)

    for i in range(n_rows):
        for j in range(n_cols):
            r0 = top + i * cell
            c0 = left + j * cell
            canvas[r0 : r0 + cell - 1, c0 : c0 + cell - 1] = ramp_color(values[i, j])

    for i, lbl in enumerate(rows):
        _blit_text(canvas, lbl, top + i * cell + (cell - GLYPH_H) // 2, 3)
    for j, lbl in enumerate(cols):
        _blit_text(canvas, lbl, 3, left + j * cell + (cell - GLYPH_H) // 2, rotate=True)

    pngio.save_rgb(path, canvas)


def plot_colormap(cm, path) -> None:
    """Pick x place success-rate heatmap."""
    heatmap(cm.success, list(cm.pick_colors), list(cm.place_colors), path)


def plot_semantic_heatmap(encoder, unseen_instructions, seen_instructions, path) -> None:
    """Pairwise embedding inner products, unseen rows x seen columns."""
    from .rewriting import embed

    if not unseen_instructions or not seen_instructions:
        raise ValueError("instruction sets must be non-empty")
    mat = np.zeros((len(unseen_instructions), len(seen_instructions)))
    seen_vecs = [embed(encoder, s.raw) for s in seen_instructions]
    for i, u in enumerate(unseen_instructions):
        uv = embed(encoder, u.raw)
        for j, sv in enumerate(seen_vecs):
            mat[i, j] = float(np.dot(uv, sv))
    heatmap(
        mat,
        [u.pick_slot for u in unseen_instructions],
        [s.pick_slot for s in seen_instructions],
        path,
        cell=14,
    )
