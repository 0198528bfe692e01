"""Suction pick-and-place execution on a Scene."""

from __future__ import annotations

import enum
from dataclasses import dataclass

from numpy.random import SeedSequence, default_rng

from .geometry import contains_point
from .scene import EDGE_MARGIN, IMAGE_H, IMAGE_W, PPU, TABLE_H, TABLE_W, Scene


class ExecutionOutcome(enum.Enum):
    GRASPED = "grasped"
    GRASP_MISS = "grasp-miss"
    DROPPED = "dropped"


@dataclass(frozen=True)
class Pixel:
    row: int
    col: int

    def __post_init__(self):
        if not (0 <= self.row < IMAGE_H and 0 <= self.col < IMAGE_W):
            raise ValueError(f"pixel out of bounds: ({self.row}, {self.col})")

    @property
    def xy(self) -> tuple[float, float]:
        return ((self.col + 0.5) / PPU, (self.row + 0.5) / PPU)


@dataclass(frozen=True)
class Action:
    pick: Pixel
    place: Pixel


@dataclass(frozen=True)
class ExecNoise:
    """Seeded mid-transfer drop model; one Bernoulli draw per execution."""

    p_drop: float
    seed: int
    jitter: float = 0.08


def apply_action(scene: Scene, action: Action, noise: ExecNoise | None = None):
    """Execute a suction pick-and-place; returns (new scene, outcome).

    A pick strictly inside some footprint grasps the topmost such object
    and translates its centroid to the place coordinate. No rotation.
    """
    px, py = action.pick.xy
    hit = [o for o in scene.objects if contains_point(o.footprint, o.x, o.y, o.theta, px, py)]
    if not hit:
        return scene, ExecutionOutcome.GRASP_MISS
    target = max(hit, key=lambda o: (o.height, o.id))

    dest_x, dest_y = action.place.xy
    outcome = ExecutionOutcome.GRASPED
    if noise is not None and noise.p_drop > 0:
        rng = default_rng(SeedSequence(noise.seed))
        if rng.random() < noise.p_drop:
            mid_x = (px + dest_x) / 2
            mid_y = (py + dest_y) / 2
            dest_x = min(max(mid_x + rng.uniform(-noise.jitter, noise.jitter), EDGE_MARGIN), TABLE_W - EDGE_MARGIN)
            dest_y = min(max(mid_y + rng.uniform(-noise.jitter, noise.jitter), EDGE_MARGIN), TABLE_H - EDGE_MARGIN)
            outcome = ExecutionOutcome.DROPPED

    moved = target.moved_to(dest_x, dest_y)
    objects = [moved if o.id == target.id else o for o in scene.objects]
    return scene.with_objects(objects), outcome
