"""Color names, CIELAB conversion and the shared palette.

The palette file is the single source of truth for every RGB value used by
the renderer, the grounding matcher and the policy prototypes, so all of
them agree bit-exactly on what e.g. "brown" looks like.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

import numpy as np

# sRGB -> XYZ (D65) matrix, IEC 61966-2-1.
_RGB_TO_XYZ = np.array(
    [
        [0.412453, 0.357580, 0.180423],
        [0.212671, 0.715160, 0.072169],
        [0.019334, 0.119193, 0.950227],
    ]
)
# D65 reference white.
_WHITE = np.array([0.95047, 1.0, 1.08883])


def srgb_to_lab(rgb: np.ndarray) -> np.ndarray:
    """Convert 8-bit sRGB values (last axis = 3) to CIELAB under D65."""
    rgb = np.asarray(rgb, dtype=np.float64) / 255.0
    lin = np.where(rgb > 0.04045, ((rgb + 0.055) / 1.055) ** 2.4, rgb / 12.92)
    xyz = lin @ _RGB_TO_XYZ.T
    t = xyz / _WHITE
    eps = (6.0 / 29.0) ** 3
    f = np.where(t > eps, np.cbrt(t), t / (3 * (6.0 / 29.0) ** 2) + 4.0 / 29.0)
    lab = np.empty_like(xyz)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


def lab_to_srgb(lab: np.ndarray) -> np.ndarray:
    """Inverse of srgb_to_lab; returns float values clipped to [0, 255]."""
    lab = np.asarray(lab, dtype=np.float64)
    fy = (lab[..., 0] + 16.0) / 116.0
    fx = fy + lab[..., 1] / 500.0
    fz = fy - lab[..., 2] / 200.0
    f = np.stack([fx, fy, fz], axis=-1)
    delta = 6.0 / 29.0
    t = np.where(f > delta, f**3, 3 * delta**2 * (f - 4.0 / 29.0))
    xyz = t * _WHITE
    lin = xyz @ np.linalg.inv(_RGB_TO_XYZ).T
    lin = np.clip(lin, 0.0, None)
    srgb = np.where(lin > 0.0031308, 1.055 * lin ** (1 / 2.4) - 0.055, 12.92 * lin)
    return np.clip(srgb * 255.0, 0.0, 255.0)


def delta_e(lab_a: np.ndarray, lab_b: np.ndarray) -> np.ndarray:
    """CIE76 Euclidean distance between CIELAB values."""
    return np.sqrt(np.sum((np.asarray(lab_a) - np.asarray(lab_b)) ** 2, axis=-1))


@dataclass(frozen=True)
class ColorName:
    name: str
    rgb: tuple[int, int, int]
    tags: frozenset[str]

    @property
    def lab(self) -> np.ndarray:
        return srgb_to_lab(np.array(self.rgb, dtype=np.float64))


class PaletteError(ValueError):
    pass


class Palette:
    """Ordered color table with split views; order follows the data file."""

    def __init__(self, colors: list[ColorName]):
        self._colors = list(colors)
        self._by_name = {c.name: c for c in self._colors}
        if len(self._by_name) != len(self._colors):
            raise PaletteError("duplicate color name in palette")

    def __getitem__(self, name: str) -> ColorName:
        try:
            return self._by_name[name]
        except KeyError:
            raise PaletteError(f"unknown color name: {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def __iter__(self):
        return iter(self._colors)

    def __len__(self) -> int:
        return len(self._colors)

    def names(self) -> list[str]:
        return [c.name for c in self._colors]

    def with_tag(self, tag: str) -> list[ColorName]:
        return [c for c in self._colors if tag in c.tags]

    @property
    def seen(self) -> list[ColorName]:
        return self.with_tag("seen")

    @property
    def unseen(self) -> list[ColorName]:
        return self.with_tag("unseen")

    @property
    def background(self) -> ColorName:
        return self.with_tag("background")[0]

    @property
    def background_pool(self) -> list[ColorName]:
        return self.with_tag("bgpool")

    def rgb(self, name: str) -> np.ndarray:
        return np.array(self[name].rgb, dtype=np.uint8)

    def lab(self, name: str) -> np.ndarray:
        return self[name].lab

    def nearest(self, rgb, candidates: list[str] | None = None) -> str:
        """Name of the palette color nearest in CIELAB to an RGB triple."""
        names = candidates if candidates is not None else self.names()
        lab = srgb_to_lab(np.asarray(rgb, dtype=np.float64))
        dists = [float(delta_e(lab, self.lab(n))) for n in names]
        return names[int(np.argmin(dists))]


def parse_palette(text: str) -> Palette:
    colors = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 5:
            raise PaletteError(f"malformed palette line: {line!r}")
        name, r, g, b, tags = parts
        colors.append(
            ColorName(
                name=name,
                rgb=(int(r), int(g), int(b)),
                tags=frozenset(t for t in tags.split(",") if t),
            )
        )
    return Palette(colors)


def load_palette() -> Palette:
    text = resources.files("synthobs.data").joinpath("palette.tsv").read_text()
    return parse_palette(text)
