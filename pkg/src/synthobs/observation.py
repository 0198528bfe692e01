"""Observation = what the policy sees, plus the handle to replay its scene."""

from __future__ import annotations

from dataclasses import dataclass

from .instructions import Instruction
from .render import RGBDImage
from .scene import Scene, TaskSpec, generate_scene


@dataclass(frozen=True)
class SceneRef:
    """Everything needed to regenerate a scene bit-identically."""

    task_kind: str
    split: str
    seed: int
    goal_colors: tuple[str, str] | None = None
    goal_category: str | None = None

    def regenerate(self) -> Scene:
        return generate_scene(
            TaskSpec(self.task_kind, self.split),
            self.seed,
            goal_colors=self.goal_colors,
            goal_category=self.goal_category,
        )


@dataclass(frozen=True)
class Observation:
    image: RGBDImage
    instruction: Instruction
    scene_ref: SceneRef
