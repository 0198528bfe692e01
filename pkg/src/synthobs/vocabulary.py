"""Packing-object vocabulary: 56 categories split 37 seen / 19 unseen."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

import numpy as np

from .geometry import Footprint, parse_shape


class VocabularyError(ValueError):
    pass


@dataclass(frozen=True)
class VocabObject:
    name: str
    split: str  # "seen" | "unseen"
    footprint: Footprint
    height: float
    rgb: tuple[int, int, int]
    rgb2: tuple[int, int, int] | None
    texture: str  # "solid" | "striped"
    alignment: float

    @property
    def volume(self) -> float:
        return self.footprint.area * self.height


class Vocabulary:
    def __init__(self, objects: list[VocabObject]):
        self._objects = list(objects)
        self._by_name = {o.name: o for o in self._objects}
        if len(self._by_name) != len(self._objects):
            raise VocabularyError("duplicate category name")

    def __getitem__(self, name: str) -> VocabObject:
        try:
            return self._by_name[name]
        except KeyError:
            raise VocabularyError(f"unknown category: {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def __iter__(self):
        return iter(self._objects)

    def __len__(self) -> int:
        return len(self._objects)

    def names(self, split: str | None = None) -> list[str]:
        if split is None:
            return [o.name for o in self._objects]
        return [o.name for o in self._objects if o.split == split]

    @property
    def seen(self) -> list[VocabObject]:
        return [o for o in self._objects if o.split == "seen"]

    @property
    def unseen(self) -> list[VocabObject]:
        return [o for o in self._objects if o.split == "unseen"]


def _parse_rgb(text: str) -> tuple[int, int, int] | None:
    if text == "-":
        return None
    r, g, b = text.split(",")
    return (int(r), int(g), int(b))


def parse_vocabulary(text: str) -> Vocabulary:
    objects = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 8:
            raise VocabularyError(f"malformed vocabulary line: {line!r}")
        name, split, shape, height, rgb1, rgb2, texture, alignment = parts
        if split not in ("seen", "unseen"):
            raise VocabularyError(f"bad split {split!r} for {name!r}")
        rgb = _parse_rgb(rgb1)
        if rgb is None:
            raise VocabularyError(f"missing primary color for {name!r}")
        objects.append(
            VocabObject(
                name=name,
                split=split,
                footprint=parse_shape(shape),
                height=float(height),
                rgb=rgb,
                rgb2=_parse_rgb(rgb2),
                texture=texture,
                alignment=float(alignment),
            )
        )
    vocab = Vocabulary(objects)
    n_seen, n_unseen = len(vocab.seen), len(vocab.unseen)
    if (n_seen, n_unseen) != (37, 19):
        raise VocabularyError(f"expected 37 seen + 19 unseen, got {n_seen}+{n_unseen}")
    return vocab


def load_vocabulary() -> Vocabulary:
    text = resources.files("synthobs.data").joinpath("objects.tsv").read_text()
    return parse_vocabulary(text)


def _distant_color(rng, protos_lab: list[np.ndarray], min_de: float = 35.0) -> np.ndarray:
    from .colors import delta_e, srgb_to_lab

    for _ in range(64):
        cand = rng.integers(0, 256, size=3).astype(np.float64)
        lab = srgb_to_lab(cand)
        if all(float(delta_e(lab, p)) >= min_de for p in protos_lab):
            return cand
    return cand  # vanishingly unlikely; accept the last draw


def variant_rgb(obj: VocabObject, variant: int) -> tuple[np.ndarray, np.ndarray | None]:
    """Appearance of edit variant `variant` for a category.

    Each category has a small set of canonical generated looks, fixed by
    (category, variant). A variant reproduces the trained appearance up to
    a small jitter, except that with probability (1 - alignment) it is a
    stably wrong interpretation of the prompt and renders a distant color.
    """
    import zlib

    from .colors import srgb_to_lab

    rng = np.random.default_rng(
        np.random.SeedSequence([zlib.crc32(obj.name.encode()), int(variant), 0xA11A])
    )
    base1 = np.array(obj.rgb, dtype=np.float64)
    base2 = None if obj.rgb2 is None else np.array(obj.rgb2, dtype=np.float64)
    protos = [srgb_to_lab(base1)] + ([] if base2 is None else [srgb_to_lab(base2)])
    wrong = rng.random() > obj.alignment
    if wrong:
        c1 = _distant_color(rng, protos)
        c2 = None if base2 is None else _distant_color(rng, protos)
    else:
        amp = (1.0 - obj.alignment) * 10.0
        c1 = np.clip(base1 + rng.uniform(-amp, amp, size=3), 0, 255)
        c2 = None
        if base2 is not None:
            c2 = np.clip(base2 + rng.uniform(-amp, amp, size=3), 0, 255)
    return np.round(c1).astype(np.uint8), None if c2 is None else np.round(c2).astype(np.uint8)
