"""Prompt-grounded open-vocabulary detection on rendered observations.

Objects are separated from the table by depth (exact at desk scale),
labeled as 4-connected components, and scored against the query by CIELAB
color distance and footprint-shape overlap. Seeded noise reproduces the
two failure classes of a learned grounder: missing the prompted object
and identifying the wrong one.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.random import SeedSequence, default_rng
from scipy import ndimage

from .colors import Palette, delta_e, srgb_to_lab
from .geometry import footprint_kernel
from .render import RGBDImage
from .scene import (
    BLOCK_FOOTPRINT,
    BOWL_FOOTPRINT,
    BOX_FOOTPRINT,
    PPU,
    default_palette,
    default_vocabulary,
)
from .vocabulary import Vocabulary

COLOR_SIM_SCALE = 40.0  # CIELAB units where color similarity hits zero


class GroundingError(RuntimeError):
    pass


class NoDetectionError(GroundingError):
    """No component cleared the detection threshold."""


@dataclass(frozen=True)
class Frame:
    """Inclusive pixel rectangle."""

    r0: int
    c0: int
    r1: int
    c1: int

    @property
    def area(self) -> int:
        return (self.r1 - self.r0 + 1) * (self.c1 - self.c0 + 1)

    def crop(self, arr: np.ndarray) -> np.ndarray:
        return arr[self.r0 : self.r1 + 1, self.c0 : self.c1 + 1]

    def expanded(self, margin: int, height: int, width: int) -> "Frame":
        """Frame grown by `margin` px, clipped to the image; includes the
        object boundary when cropping an edited region."""
        return Frame(
            max(self.r0 - margin, 0),
            max(self.c0 - margin, 0),
            min(self.r1 + margin, height - 1),
            min(self.c1 + margin, width - 1),
        )


@dataclass(frozen=True)
class DetectionResult:
    mask: np.ndarray
    frame: Frame
    confidence: float
    label: str


@dataclass(frozen=True)
class GroundingConfig:
    detection_threshold: float = 0.35
    miss_noise: float = 0.0
    misidentify_noise: float = 0.0
    noise_seed: int = 0


def frame_of(mask: np.ndarray) -> Frame:
    """Minimal axis-aligned rectangle containing all set pixels."""
    rows = np.any(mask, axis=1).nonzero()[0]
    cols = np.any(mask, axis=0).nonzero()[0]
    if rows.size == 0:
        raise GroundingError("empty mask has no frame")
    return Frame(int(rows[0]), int(cols[0]), int(rows[-1]), int(cols[-1]))


def segment_background(image: RGBDImage) -> np.ndarray:
    """All pixels at table level (depth exactly 0)."""
    return image.depth == 0


@lru_cache(maxsize=None)
def _category_kernel(category: str) -> np.ndarray | None:
    if category == "block":
        return footprint_kernel(BLOCK_FOOTPRINT, PPU)
    if category == "bowl":
        return footprint_kernel(BOWL_FOOTPRINT, PPU)
    if category == "box":
        return footprint_kernel(BOX_FOOTPRINT, PPU)
    vocab = default_vocabulary()
    if category in vocab:
        return footprint_kernel(vocab[category].footprint, PPU)
    return None


def _category_labs(category: str, vocab: Vocabulary):
    if category not in vocab:
        return None
    obj = vocab[category]
    protos = [np.array(obj.rgb, dtype=np.float64)]
    if obj.rgb2 is not None:
        c2 = np.array(obj.rgb2, dtype=np.float64)
        protos.append(c2)
        protos.append((protos[0] + c2) / 2)
    return [srgb_to_lab(p) for p in protos]


def parse_query(query: str, palette: Palette, vocab: Vocabulary) -> tuple[str | None, str]:
    """Split "<color> <category>" queries; whole-vocabulary names win."""
    query = query.strip()
    if not query:
        raise GroundingError("empty query")
    if query in vocab:
        return None, query
    first, _, rest = query.partition(" ")
    if rest and first in palette:
        return first, rest
    return None, query


def _mask_iou_with_kernel(mask: np.ndarray, kernel: np.ndarray) -> float:
    rows, cols = np.nonzero(mask)
    cr = int(round(rows.mean()))
    cc = int(round(cols.mean()))
    kh, kw = kernel.shape
    h, w = mask.shape
    r0, c0 = cr - kh // 2, cc - kw // 2
    placed = np.zeros_like(mask)
    rr0, cc0 = max(r0, 0), max(c0, 0)
    rr1, cc1 = min(r0 + kh, h), min(c0 + kw, w)
    if rr0 < rr1 and cc0 < cc1:
        placed[rr0:rr1, cc0:cc1] = kernel[rr0 - r0 : rr1 - r0, cc0 - c0 : cc1 - c0]
    inter = np.logical_and(mask, placed).sum()
    union = np.logical_or(mask, placed).sum()
    return float(inter) / float(union) if union else 0.0


def _score_component(
    mask: np.ndarray,
    rgb: np.ndarray,
    color: str | None,
    category: str,
    palette: Palette,
    vocab: Vocabulary,
) -> float:
    mean_lab = srgb_to_lab(rgb[mask].mean(axis=0))
    parts = []
    if color is not None:
        de = float(delta_e(mean_lab, palette.lab(color)))
        parts.append(max(0.0, 1.0 - de / COLOR_SIM_SCALE))
    cat_labs = _category_labs(category, vocab)
    if cat_labs is not None:
        de = min(float(delta_e(mean_lab, lab)) for lab in cat_labs)
        parts.append(max(0.0, 1.0 - de / COLOR_SIM_SCALE))
    kernel = _category_kernel(category)
    if kernel is not None:
        parts.append(_mask_iou_with_kernel(mask, kernel))
    if not parts:
        return 0.0
    return float(np.mean(parts))


def detect(
    image: RGBDImage,
    query: str,
    config: GroundingConfig,
    palette: Palette | None = None,
    vocab: Vocabulary | None = None,
) -> list[DetectionResult]:
    """Detections for `query`, best first.

    Raises NoDetectionError when nothing clears the threshold or when the
    seeded miss-noise fires for this call.
    """
    palette = palette or default_palette()
    vocab = vocab or default_vocabulary()
    color, category = parse_query(query, palette, vocab)

    labels, n = ndimage.label(image.depth > 0)
    components = []
    for idx in range(1, n + 1):
        mask = labels == idx
        conf = _score_component(mask, image.rgb, color, category, palette, vocab)
        components.append((conf, frame_of(mask), mask))
    components.sort(key=lambda t: (-t[0], t[1].r0, t[1].c0))

    detections = [
        DetectionResult(mask=m, frame=f, confidence=c, label=query)
        for c, f, m in components
        if c >= config.detection_threshold
    ]

    if config.miss_noise > 0 or config.misidentify_noise > 0:
        rng = default_rng(
            SeedSequence(
                [
                    config.noise_seed,
                    zlib.crc32(query.encode()),
                    zlib.crc32(image.rgb.tobytes()),
                ]
            )
        )
        if rng.random() < config.miss_noise:
            raise NoDetectionError(f"detector missed (seeded noise): {query!r}")
        if rng.random() < config.misidentify_noise and detections and len(components) > 1:
            top = detections[0]
            for conf, frame, mask in components:
                if not np.array_equal(mask, top.mask):
                    detections[0] = DetectionResult(
                        mask=mask, frame=frame, confidence=top.confidence, label=top.label
                    )
                    break

    if not detections:
        raise NoDetectionError(f"no component cleared threshold for {query!r}")
    return detections


def detections_to_csv(detections: list[DetectionResult]) -> str:
    lines = ["label,confidence,r0,c0,r1,c1,mask_area"]
    for d in detections:
        f = d.frame
        lines.append(
            f"{d.label},{d.confidence:.6f},{f.r0},{f.c0},{f.r1},{f.c1},{int(d.mask.sum())}"
        )
    return "\n".join(lines) + "\n"
