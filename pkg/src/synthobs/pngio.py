"""PNG import/export: 8-bit RGB, 16-bit grayscale depth, 1-bit masks.

Depth is quantized to uint16 over [0, DEPTH_SCALE] table units, which
comfortably covers every object height in the vocabulary.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

DEPTH_SCALE = 0.25


def save_rgb(path, rgb: np.ndarray) -> None:
    Image.fromarray(np.asarray(rgb, dtype=np.uint8), mode="RGB").save(Path(path), format="PNG")


def load_rgb(path) -> np.ndarray:
    return np.asarray(Image.open(Path(path)).convert("RGB"))


def save_depth(path, depth: np.ndarray) -> None:
    q = np.clip(np.asarray(depth, dtype=np.float64) / DEPTH_SCALE, 0.0, 1.0)
    arr = np.round(q * 65535.0).astype(np.uint16)
    Image.fromarray(arr, mode="I;16").save(Path(path), format="PNG")


def load_depth(path) -> np.ndarray:
    arr = np.asarray(Image.open(Path(path))).astype(np.float64)
    return arr / 65535.0 * DEPTH_SCALE


def save_mask(path, mask: np.ndarray) -> None:
    Image.fromarray(np.asarray(mask, dtype=bool)).save(Path(path), format="PNG")


def load_mask(path) -> np.ndarray:
    return np.asarray(Image.open(Path(path))).astype(bool)
