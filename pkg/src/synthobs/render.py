"""Orthographic top-down RGB-D rasterization of a Scene.

Every pixel is either background (depth 0) or shows the topmost object
covering it, where "topmost" means greatest (height, id). The instance map
uses the same rule, so renderer and ground-truth masks always agree.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import raster_mask
from .scene import IMAGE_H, IMAGE_W, PPU, ObjectSpec, Scene

STRIPE_PX = 4


@dataclass(frozen=True)
class RGBDImage:
    rgb: np.ndarray  # (H, W, 3) uint8
    depth: np.ndarray  # (H, W) float64, table units, 0 on bare table

    def __post_init__(self):
        if self.rgb.shape[:2] != self.depth.shape:
            raise ValueError("rgb and depth dimensions differ")

    @property
    def height(self) -> int:
        return self.rgb.shape[0]

    @property
    def width(self) -> int:
        return self.rgb.shape[1]

    def copy(self) -> "RGBDImage":
        return RGBDImage(self.rgb.copy(), self.depth.copy())

    def equals(self, other: "RGBDImage") -> bool:
        return np.array_equal(self.rgb, other.rgb) and np.array_equal(self.depth, other.depth)


def object_mask(obj: ObjectSpec) -> np.ndarray:
    """Footprint raster of one object, ignoring occlusion."""
    return raster_mask(obj.footprint, obj.x, obj.y, obj.theta, (IMAGE_H, IMAGE_W), PPU)


def _paint_appearance(rgb: np.ndarray, obj: ObjectSpec, mask: np.ndarray) -> None:
    if obj.texture == "striped" and obj.rgb2 is not None:
        rows = np.arange(IMAGE_H) - int(round(obj.y * PPU))
        band = ((rows // STRIPE_PX) % 2).astype(bool)
        striped = np.where(band[:, None, None], np.array(obj.rgb2, np.uint8), np.array(obj.rgb, np.uint8))
        rgb[mask] = np.broadcast_to(striped, (IMAGE_H, IMAGE_W, 3))[mask]
    else:
        rgb[mask] = np.array(obj.rgb, dtype=np.uint8)


def render_topdown(scene: Scene) -> RGBDImage:
    rgb = np.empty((IMAGE_H, IMAGE_W, 3), dtype=np.uint8)
    rgb[:, :] = np.array(scene.background_rgb, dtype=np.uint8)
    depth = np.zeros((IMAGE_H, IMAGE_W), dtype=np.float64)
    for obj in sorted(scene.objects, key=lambda o: (o.height, o.id)):
        mask = object_mask(obj)
        if not mask.any():
            continue
        _paint_appearance(rgb, obj, mask)
        depth[mask] = obj.height
    return RGBDImage(rgb=rgb, depth=depth)


def instance_map(scene: Scene) -> np.ndarray:
    """Per-pixel id of the topmost object, -1 on background."""
    ids = np.full((IMAGE_H, IMAGE_W), -1, dtype=np.int32)
    for obj in sorted(scene.objects, key=lambda o: (o.height, o.id)):
        mask = object_mask(obj)
        ids[mask] = obj.id
    return ids


def instance_mask(scene: Scene, obj_id: int) -> np.ndarray:
    """Visible ground-truth mask of one object."""
    return instance_map(scene) == obj_id
