"""Language-conditioned pick/place affordance policy, seen-vocabulary only.

The model scores each pixel by how much its local appearance resembles the
prototype named by the instruction slot, times a footprint-shape overlap
field. Two engineered failure modes mirror a policy evaluated outside its
training distribution: slots with no prototype fall back to a seeded
low-amplitude score field, and an off-domain background shifts every
perceived color by the background offset (color constancy failure), which
collapses prototype matches and leaves a seeded distraction field to pick
the argmax.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np
from numpy.random import SeedSequence, default_rng
from scipy import ndimage, signal

from .actions import Action, Pixel
from .colors import Palette, delta_e, srgb_to_lab
from .geometry import footprint_kernel
from .instructions import Descriptor
from .observation import Observation
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


class PolicyBuildError(ValueError):
    pass


class InferenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class PolicyConfig:
    match_tolerance: float = 20.0  # CIELAB dE where a color stops matching
    fallback_seed: int = 977711
    fallback_amplitude: float = 0.05


@dataclass(frozen=True)
class ShapeTemplate:
    kernel: np.ndarray  # bool footprint at theta=0, odd dims
    window: tuple[int, int]  # odd local-support window, ~1.5x kernel
    labs: tuple[np.ndarray, ...]  # appearance prototypes (1-3 CIELAB points)


@dataclass(frozen=True)
class PolicyModel:
    color_prototypes: dict[str, np.ndarray]
    object_templates: dict[str, ShapeTemplate]
    primitive_kernels: dict[str, ShapeTemplate]  # block/bowl/box, colorless
    background_prototype: np.ndarray
    config: PolicyConfig = field(default_factory=PolicyConfig)


def _odd(n: int) -> int:
    return n if n % 2 == 1 else n + 1


def _window_for(kernel: np.ndarray) -> tuple[int, int]:
    kh, kw = kernel.shape
    return (_odd(int(kh * 1.5)), _odd(int(kw * 1.5)))


def _shape_template(footprint, labs) -> ShapeTemplate:
    kernel = footprint_kernel(footprint, PPU)
    return ShapeTemplate(kernel=kernel, window=_window_for(kernel), labs=tuple(labs))


def build_policy(
    seen_colors: list[str] | None = None,
    seen_categories: list[str] | None = None,
    palette: Palette | None = None,
    vocab: Vocabulary | None = None,
    config: PolicyConfig | None = None,
) -> PolicyModel:
    """Deterministic model over the seen vocabulary; no training loop."""
    palette = palette or default_palette()
    vocab = vocab or default_vocabulary()
    config = config or PolicyConfig()
    if seen_colors is None:
        seen_colors = [c.name for c in palette.seen]
    if seen_categories is None:
        seen_categories = vocab.names("seen")

    if len(set(seen_colors)) != len(seen_colors):
        raise PolicyBuildError("duplicate color token in seen vocabulary")
    if len(set(seen_categories)) != len(seen_categories):
        raise PolicyBuildError("duplicate category token in seen vocabulary")

    color_prototypes = {}
    for name in seen_colors:
        if name not in palette:
            raise PolicyBuildError(f"color token missing from palette: {name!r}")
        color_prototypes[name] = palette.lab(name)

    object_templates = {}
    for name in seen_categories:
        if name not in vocab:
            raise PolicyBuildError(f"category token missing from vocabulary: {name!r}")
        obj = vocab[name]
        protos = [srgb_to_lab(np.array(obj.rgb, dtype=np.float64))]
        if obj.rgb2 is not None:
            c2 = np.array(obj.rgb2, dtype=np.float64)
            protos.append(srgb_to_lab(c2))
            protos.append(srgb_to_lab((np.array(obj.rgb, dtype=np.float64) + c2) / 2))
        object_templates[name] = _shape_template(obj.footprint, protos)

    primitive_kernels = {
        "block": _shape_template(BLOCK_FOOTPRINT, ()),
        "bowl": _shape_template(BOWL_FOOTPRINT, ()),
        "box": _shape_template(BOX_FOOTPRINT, ()),
    }
    return PolicyModel(
        color_prototypes=color_prototypes,
        object_templates=object_templates,
        primitive_kernels=primitive_kernels,
        background_prototype=palette.background.lab,
        config=config,
    )


def _local_lab(image: RGBDImage) -> np.ndarray:
    mean3 = np.empty(image.rgb.shape, dtype=np.float64)
    for ch in range(3):
        mean3[..., ch] = ndimage.uniform_filter(image.rgb[..., ch].astype(np.float64), size=3)
    return srgb_to_lab(np.clip(mean3, 0, 255))


def _shape_overlap(match: np.ndarray, template: ShapeTemplate) -> np.ndarray:
    """Sliding IoU between the matched-color region and the footprint."""
    kern = template.kernel.astype(np.float64)
    ksum = kern.sum()
    win = np.ones(template.window, dtype=np.float64)
    m = match.astype(np.float64)
    inter = np.clip(signal.fftconvolve(m, kern, mode="same"), 0.0, None)
    inwin = np.clip(signal.fftconvolve(m, win, mode="same"), 0.0, None)
    union = ksum + inwin - inter
    return inter / np.maximum(union, 1.0)


def _fallback_field(config: PolicyConfig, token: str, slot: str, shape) -> np.ndarray:
    rng = default_rng(
        SeedSequence([config.fallback_seed, zlib.crc32(token.encode()), zlib.crc32(slot.encode())])
    )
    return rng.random(shape) * config.fallback_amplitude


def _distraction_field(config: PolicyConfig, image: RGBDImage, slot: str) -> np.ndarray:
    rng = default_rng(
        SeedSequence(
            [config.fallback_seed, 0xB6, zlib.crc32(image.rgb.tobytes()), zlib.crc32(slot.encode())]
        )
    )
    return rng.random(image.depth.shape)


def _background_shift(model: PolicyModel, image: RGBDImage) -> np.ndarray:
    """CIELAB offset of the observed table color from the training one."""
    bare = image.depth == 0
    if not bare.any():
        return np.zeros(3)
    est = srgb_to_lab(image.rgb[bare].mean(axis=0))
    return est - model.background_prototype


def _descriptor_scores(
    model: PolicyModel, image: RGBDImage, lab_img: np.ndarray, desc: Descriptor, slot: str
) -> np.ndarray:
    cfg = model.config
    if desc.category in model.primitive_kernels:
        if desc.color is None or desc.color not in model.color_prototypes:
            return _fallback_field(cfg, desc.query_text(), slot, image.depth.shape)
        template = model.primitive_kernels[desc.category]
        labs = (model.color_prototypes[desc.color],)
    elif desc.category in model.object_templates:
        template = model.object_templates[desc.category]
        labs = template.labs
    else:
        return _fallback_field(cfg, desc.query_text(), slot, image.depth.shape)

    de = np.min(np.stack([delta_e(lab_img, lab) for lab in labs]), axis=0)
    sim = np.clip(1.0 - de / cfg.match_tolerance, 0.0, 1.0)
    overlap = _shape_overlap(de < cfg.match_tolerance, template)
    return sim * overlap


def _affordance(model: PolicyModel, obs: Observation, slot: str, lab_img=None) -> np.ndarray:
    desc = obs.instruction.pick if slot == "pick" else obs.instruction.place
    if not desc.category:
        raise InferenceError(f"unparseable {slot} descriptor")
    if lab_img is None:
        lab_img = _local_lab(obs.image)
    cfg = model.config
    # off-domain background: color constancy breaks, every perceived color
    # drags along the background offset and prototype matches collapse
    shift = _background_shift(model, obs.image)
    corrupted = float(np.linalg.norm(shift)) > cfg.match_tolerance
    scores = _descriptor_scores(model, obs.image, lab_img - shift if corrupted else lab_img, desc, slot)
    if corrupted:
        scores = scores + cfg.fallback_amplitude * _distraction_field(cfg, obs.image, slot)
    return scores


def pick_affordance(model: PolicyModel, obs: Observation) -> np.ndarray:
    return _affordance(model, obs, "pick")


def place_affordance(model: PolicyModel, obs: Observation) -> np.ndarray:
    return _affordance(model, obs, "place")


def argmax_pixel(scores: np.ndarray) -> Pixel:
    """Highest-scoring pixel; ties resolve to the smallest (row, col)."""
    r, c = np.unravel_index(int(np.argmax(scores)), scores.shape)
    return Pixel(int(r), int(c))


def infer(model: PolicyModel, obs: Observation) -> Action:
    lab_img = _local_lab(obs.image)
    return Action(
        pick=argmax_pixel(_affordance(model, obs, "pick", lab_img)),
        place=argmax_pixel(_affordance(model, obs, "place", lab_img)),
    )
