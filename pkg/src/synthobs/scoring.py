"""Episode reward scoring."""

from __future__ import annotations

from .geometry import contains_point
from .scene import PUT_BLOCK_IN_BOWL, Scene


class ScoringError(RuntimeError):
    pass


def _centroid_inside(obj, container) -> bool:
    return contains_point(
        container.footprint, container.x, container.y, container.theta, obj.x, obj.y
    )


def score_put_block(scene: Scene) -> float:
    """1 iff the goal-color block's centroid is strictly inside the
    goal-color bowl; 0 otherwise."""
    blocks = scene.matching(scene.goal_pick)
    bowls = scene.matching(scene.goal_place)
    if len(blocks) != 1 or not bowls:
        raise ScoringError("goal objects missing or ambiguous; scene corrupt")
    return 1.0 if any(_centroid_inside(blocks[0], b) for b in bowls) else 0.0


def score_packing(scene: Scene) -> float:
    """Packed goal-category volume divided by total goal-category volume."""
    goal_objs = scene.matching(scene.goal_pick)
    if not goal_objs:
        raise ScoringError("no goal-category object in scene")
    boxes = [o for o in scene.objects if o.category == "box"]
    if not boxes:
        raise ScoringError("no box in packing scene")
    box = boxes[0]
    packed = sum(o.volume for o in goal_objs if _centroid_inside(o, box))
    total = sum(o.volume for o in goal_objs)
    return packed / total


def score(scene: Scene) -> float:
    if scene.task_kind == PUT_BLOCK_IN_BOWL:
        return score_put_block(scene)
    return score_packing(scene)
