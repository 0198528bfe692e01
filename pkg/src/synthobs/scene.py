"""Scene construction for the three task families, plus text serialization.

Tables are 1.0 x 0.5 units rendered at 320 px/unit (320x160 images). All
randomness flows through one numpy Generator seeded from the scene seed, so
identical (task, seed) pairs produce bit-identical scenes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cache

from numpy.random import SeedSequence, default_rng

from .colors import Palette, load_palette
from .geometry import Disc, Footprint, Rect, parse_shape
from .instructions import BLOCK_IN_BOWL, PACK_OBJECT, Descriptor, Instruction
from .vocabulary import Vocabulary, load_vocabulary

TABLE_W = 1.0
TABLE_H = 0.5
PPU = 320.0
IMAGE_W = 320
IMAGE_H = 160

BLOCK_FOOTPRINT = Rect(0.05, 0.05)
BLOCK_HEIGHT = 0.04
BOWL_FOOTPRINT = Disc(0.06)
BOX_FOOTPRINT = Rect(0.16, 0.16)
RECEPTACLE_HEIGHT = 0.01  # flat, never occludes placed objects

EDGE_MARGIN = 0.02
PLACEMENT_GAP = 0.01  # keeps rasterized footprints >= 2px apart

PUT_BLOCK_IN_BOWL = "put-block-in-bowl"
PACK_OBJECT_TASK = "pack-object"
PACK_UNSEEN_BACKGROUND = "pack-object-unseen-background"
PACK_UNSEEN_OBJECT_BACKGROUND = "pack-unseen-object-unseen-background"
TASK_KINDS = (
    PUT_BLOCK_IN_BOWL,
    PACK_OBJECT_TASK,
    PACK_UNSEEN_BACKGROUND,
    PACK_UNSEEN_OBJECT_BACKGROUND,
)


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class TaskSpec:
    kind: str
    split: str  # "seen" | "unseen"

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise GenerationError(f"unknown task kind: {self.kind!r}")
        if self.split not in ("seen", "unseen"):
            raise GenerationError(f"unknown split: {self.split!r}")


@dataclass(frozen=True)
class ObjectSpec:
    id: int
    category: str  # "block" | "bowl" | "box" | vocabulary name
    color: str  # palette name, or "" for vocabulary appearance
    footprint: Footprint
    height: float
    x: float
    y: float
    theta: float
    rgb: tuple[int, int, int]
    rgb2: tuple[int, int, int] | None
    texture: str  # "solid" | "striped"
    split: str

    @property
    def volume(self) -> float:
        return self.footprint.area * self.height

    def moved_to(self, x: float, y: float) -> "ObjectSpec":
        return replace(self, x=x, y=y)


@dataclass(frozen=True)
class Scene:
    task_kind: str
    split: str
    rng_seed: int
    background: str  # palette name
    background_rgb: tuple[int, int, int]
    objects: tuple[ObjectSpec, ...]
    goal_pick: Descriptor
    goal_place: Descriptor

    @property
    def bounds(self) -> tuple[float, float]:
        return (TABLE_W, TABLE_H)

    @property
    def instruction(self) -> Instruction:
        if self.task_kind == PUT_BLOCK_IN_BOWL:
            return Instruction(BLOCK_IN_BOWL, self.goal_pick.color, self.goal_place.color)
        return Instruction(PACK_OBJECT, self.goal_pick.category, "brown box")

    def matching(self, desc: Descriptor) -> list[ObjectSpec]:
        out = []
        for obj in self.objects:
            if obj.category != desc.category:
                continue
            if desc.color is not None and obj.color != desc.color:
                continue
            out.append(obj)
        return out

    def with_objects(self, objects) -> "Scene":
        return replace(self, objects=tuple(objects))


@cache
def default_palette() -> Palette:
    return load_palette()


@cache
def default_vocabulary() -> Vocabulary:
    return load_vocabulary()


def _sample_pose(rng, footprint: Footprint, placed: list[tuple[float, float, float]], tries: int = 300):
    r = footprint.bounding_radius
    lo_x, hi_x = EDGE_MARGIN + r, TABLE_W - EDGE_MARGIN - r
    lo_y, hi_y = EDGE_MARGIN + r, TABLE_H - EDGE_MARGIN - r
    if lo_x >= hi_x or lo_y >= hi_y:
        raise GenerationError("footprint too large for the table")
    for _ in range(tries):
        x = rng.uniform(lo_x, hi_x)
        y = rng.uniform(lo_y, hi_y)
        if all(math.hypot(x - px, y - py) > r + pr + PLACEMENT_GAP for px, py, pr in placed):
            placed.append((x, y, r))
            return x, y
    raise GenerationError("could not place object without overlap")


def _primitive(palette: Palette, obj_id: int, category: str, color: str, x: float, y: float, split: str) -> ObjectSpec:
    if category == "block":
        fp, h = BLOCK_FOOTPRINT, BLOCK_HEIGHT
    elif category == "bowl":
        fp, h = BOWL_FOOTPRINT, RECEPTACLE_HEIGHT
    elif category == "box":
        fp, h = BOX_FOOTPRINT, RECEPTACLE_HEIGHT
    else:
        raise GenerationError(f"not a primitive category: {category!r}")
    return ObjectSpec(
        id=obj_id,
        category=category,
        color=color,
        footprint=fp,
        height=h,
        x=x,
        y=y,
        theta=0.0,
        rgb=palette[color].rgb,
        rgb2=None,
        texture="solid",
        split=split,
    )


def _vocab_object(vocab: Vocabulary, obj_id: int, name: str, x: float, y: float) -> ObjectSpec:
    vo = vocab[name]
    return ObjectSpec(
        id=obj_id,
        category=name,
        color="",
        footprint=vo.footprint,
        height=vo.height,
        x=x,
        y=y,
        theta=0.0,
        rgb=vo.rgb,
        rgb2=vo.rgb2,
        texture=vo.texture,
        split=vo.split,
    )


def _gen_block_in_bowl(task: TaskSpec, seed: int, rng, palette: Palette, goal_colors):
    split_pool = [c.name for c in (palette.seen if task.split == "seen" else palette.unseen)]
    all_pool = sorted({c.name for c in palette.seen} | {c.name for c in palette.unseen})
    if goal_colors is None:
        pick_color, place_color = (str(c) for c in rng.choice(split_pool, size=2, replace=False))
    else:
        pick_color, place_color = goal_colors
    n_distract = int(rng.integers(2, 5))

    placed: list[tuple[float, float, float]] = []
    objects = []
    x, y = _sample_pose(rng, BLOCK_FOOTPRINT, placed)
    objects.append(_primitive(palette, 0, "block", pick_color, x, y, task.split))
    x, y = _sample_pose(rng, BOWL_FOOTPRINT, placed)
    objects.append(_primitive(palette, 1, "bowl", place_color, x, y, task.split))
    for i in range(n_distract):
        kind = "block" if rng.random() < 0.5 else "bowl"
        banned = pick_color if kind == "block" else place_color
        options = [c for c in all_pool if c != banned]
        color = str(rng.choice(options))
        fp = BLOCK_FOOTPRINT if kind == "block" else BOWL_FOOTPRINT
        x, y = _sample_pose(rng, fp, placed)
        objects.append(_primitive(palette, 2 + i, kind, color, x, y, task.split))

    bg = palette.background
    return Scene(
        task_kind=task.kind,
        split=task.split,
        rng_seed=seed,
        background=bg.name,
        background_rgb=bg.rgb,
        objects=tuple(objects),
        goal_pick=Descriptor(category="block", color=pick_color),
        goal_place=Descriptor(category="bowl", color=place_color),
    )


def _gen_packing(task: TaskSpec, seed: int, rng, palette: Palette, vocab: Vocabulary, goal_category):
    if task.kind == PACK_UNSEEN_BACKGROUND or task.split == "seen":
        pool = vocab.names("seen")
    else:
        pool = vocab.names("unseen")
    unseen_bg = task.split == "unseen" and task.kind in (
        PACK_UNSEEN_BACKGROUND,
        PACK_UNSEEN_OBJECT_BACKGROUND,
    )
    if goal_category is None:
        goal_category = str(rng.choice(pool))
    elif goal_category not in vocab:
        raise GenerationError(f"unknown goal category: {goal_category!r}")
    n_distract = int(rng.integers(2, 5))
    others = [n for n in pool if n != goal_category]
    if n_distract > len(others):
        raise GenerationError("split vocabulary exhausted for distractors")
    distractors = [str(n) for n in rng.choice(others, size=n_distract, replace=False)]

    if unseen_bg:
        bg = palette.background_pool[int(rng.integers(0, len(palette.background_pool)))]
    else:
        bg = palette.background

    placed: list[tuple[float, float, float]] = []
    objects = []
    x, y = _sample_pose(rng, BOX_FOOTPRINT, placed)
    objects.append(_primitive(palette, 0, "box", "brown", x, y, task.split))
    vo = vocab[goal_category]
    x, y = _sample_pose(rng, vo.footprint, placed)
    objects.append(_vocab_object(vocab, 1, goal_category, x, y))
    for i, name in enumerate(distractors):
        x, y = _sample_pose(rng, vocab[name].footprint, placed)
        objects.append(_vocab_object(vocab, 2 + i, name, x, y))

    return Scene(
        task_kind=task.kind,
        split=task.split,
        rng_seed=seed,
        background=bg.name,
        background_rgb=bg.rgb,
        objects=tuple(objects),
        goal_pick=Descriptor(category=goal_category),
        goal_place=Descriptor(category="box", color="brown"),
    )


def generate_scene(
    task: TaskSpec,
    seed: int,
    goal_colors: tuple[str, str] | None = None,
    goal_category: str | None = None,
    palette: Palette | None = None,
    vocab: Vocabulary | None = None,
) -> Scene:
    """Build the deterministic scene for (task, seed).

    `goal_colors` forces the block/bowl colors (used by colormap
    calibration); `goal_category` forces the packing target.
    """
    palette = palette or default_palette()
    vocab = vocab or default_vocabulary()
    rng = default_rng(SeedSequence(seed))
    if task.kind == PUT_BLOCK_IN_BOWL:
        return _gen_block_in_bowl(task, seed, rng, palette, goal_colors)
    return _gen_packing(task, seed, rng, palette, vocab, goal_category)


# --- text serialization -------------------------------------------------

def _rgb_text(rgb) -> str:
    return "-" if rgb is None else ",".join(str(int(v)) for v in rgb)


def _parse_rgb_text(text: str):
    if text == "-":
        return None
    r, g, b = text.split(",")
    return (int(r), int(g), int(b))


def scene_to_text(scene: Scene) -> str:
    lines = [
        "scene v1",
        f"task: {scene.task_kind}",
        f"split: {scene.split}",
        f"seed: {scene.rng_seed}",
        f"bounds: {TABLE_W!r} {TABLE_H!r}",
        f"background: {scene.background} {_rgb_text(scene.background_rgb)}",
        f"goal-pick: {scene.goal_pick.color or '-'}|{scene.goal_pick.category}",
        f"goal-place: {scene.goal_place.color or '-'}|{scene.goal_place.category}",
    ]
    for o in scene.objects:
        fields = [
            f"id={o.id}",
            f"category={o.category}",
            f"color={o.color or '-'}",
            f"shape={o.footprint.shape_text()}",
            f"height={o.height!r}",
            f"pose={o.x!r},{o.y!r},{o.theta!r}",
            f"rgb={_rgb_text(o.rgb)}",
            f"rgb2={_rgb_text(o.rgb2)}",
            f"texture={o.texture}",
            f"split={o.split}",
            f"volume={o.volume!r}",
        ]
        lines.append("object:\t" + "\t".join(fields))
    return "\n".join(lines) + "\n"


def scene_from_text(text: str) -> Scene:
    header: dict[str, str] = {}
    objects = []
    for line in text.splitlines():
        if not line or line == "scene v1":
            continue
        if line.startswith("object:\t"):
            kv = {}
            for field in line.split("\t")[1:]:
                k, _, v = field.partition("=")
                kv[k] = v
            x, y, theta = (float(v) for v in kv["pose"].split(","))
            objects.append(
                ObjectSpec(
                    id=int(kv["id"]),
                    category=kv["category"],
                    color="" if kv["color"] == "-" else kv["color"],
                    footprint=parse_shape(kv["shape"]),
                    height=float(kv["height"]),
                    x=x,
                    y=y,
                    theta=theta,
                    rgb=_parse_rgb_text(kv["rgb"]),
                    rgb2=_parse_rgb_text(kv["rgb2"]),
                    texture=kv["texture"],
                    split=kv["split"],
                )
            )
        else:
            key, _, value = line.partition(": ")
            header[key] = value

    def _desc(text: str) -> Descriptor:
        color, _, category = text.partition("|")
        return Descriptor(category=category, color=None if color == "-" else color)

    bg_name, _, bg_rgb = header["background"].partition(" ")
    return Scene(
        task_kind=header["task"],
        split=header["split"],
        rng_seed=int(header["seed"]),
        background=bg_name,
        background_rgb=_parse_rgb_text(bg_rgb),
        objects=tuple(objects),
        goal_pick=_desc(header["goal-pick"]),
        goal_place=_desc(header["goal-place"]),
    )
