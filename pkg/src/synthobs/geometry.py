"""Parametric 2.5-D footprints and their rasterization.

Footprints are defined in table units with the centroid at the local
origin; world placement is (x, y, theta). Pixel centers sit at
((col + 0.5) / ppu, (row + 0.5) / ppu) and containment is strict, so a
centroid exactly on a boundary does not count as inside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class Footprint:
    def contains(self, dx, dy):
        raise NotImplementedError

    @property
    def area(self) -> float:
        raise NotImplementedError

    @property
    def bounding_radius(self) -> float:
        raise NotImplementedError

    def shape_text(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class Rect(Footprint):
    width: float
    length: float

    def contains(self, dx, dy):
        return (np.abs(dx) < self.width / 2) & (np.abs(dy) < self.length / 2)

    @property
    def area(self) -> float:
        return self.width * self.length

    @property
    def bounding_radius(self) -> float:
        return math.hypot(self.width, self.length) / 2

    def shape_text(self) -> str:
        return f"rect:{self.width:g}x{self.length:g}"


@dataclass(frozen=True)
class Disc(Footprint):
    radius: float

    def contains(self, dx, dy):
        return np.asarray(dx) ** 2 + np.asarray(dy) ** 2 < self.radius**2

    @property
    def area(self) -> float:
        return math.pi * self.radius**2

    @property
    def bounding_radius(self) -> float:
        return self.radius

    def shape_text(self) -> str:
        return f"disc:{self.radius:g}"


@dataclass(frozen=True)
class Polygon(Footprint):
    vertices: tuple[tuple[float, float], ...]  # centroid at origin
    label: str = ""  # original spec text, e.g. "ngon:5:0.04"

    def contains(self, dx, dy):
        px, py = np.broadcast_arrays(
            np.asarray(dx, dtype=np.float64), np.asarray(dy, dtype=np.float64)
        )
        inside = np.zeros(px.shape, dtype=bool)
        vx = [v[0] for v in self.vertices]
        vy = [v[1] for v in self.vertices]
        n = len(self.vertices)
        j = n - 1
        for i in range(n):
            crosses = (vy[i] > py) != (vy[j] > py)
            with np.errstate(divide="ignore", invalid="ignore"):
                xint = (vx[j] - vx[i]) * (py - vy[i]) / (vy[j] - vy[i]) + vx[i]
            inside ^= crosses & (px < xint)
            j = i
        return inside if inside.shape else bool(inside)

    @property
    def area(self) -> float:
        s = 0.0
        n = len(self.vertices)
        for i in range(n):
            x0, y0 = self.vertices[i]
            x1, y1 = self.vertices[(i + 1) % n]
            s += x0 * y1 - x1 * y0
        return abs(s) / 2

    @property
    def bounding_radius(self) -> float:
        return max(math.hypot(x, y) for x, y in self.vertices)

    def shape_text(self) -> str:
        if self.label:
            return self.label
        coords = ";".join(f"{x:g},{y:g}" for x, y in self.vertices)
        return f"poly:{coords}"


def regular_polygon(n_sides: int, circumradius: float) -> Polygon:
    """Regular n-gon, one vertex pointing +y; centroid at origin."""
    if n_sides < 3:
        raise GeometryError("polygon needs >= 3 sides")
    verts = []
    for k in range(n_sides):
        ang = math.pi / 2 + 2 * math.pi * k / n_sides
        verts.append((circumradius * math.cos(ang), circumradius * math.sin(ang)))
    # re-center on the exact centroid (analytically 0 for regular n-gons,
    # but float sums are not); keeps translation-to-centroid semantics exact
    cx = sum(v[0] for v in verts) / n_sides
    cy = sum(v[1] for v in verts) / n_sides
    verts = tuple((x - cx, y - cy) for x, y in verts)
    return Polygon(vertices=verts, label=f"ngon:{n_sides}:{circumradius:g}")


def parse_shape(text: str) -> Footprint:
    kind, _, rest = text.partition(":")
    try:
        if kind == "rect":
            w, x, l = rest.partition("x")
            return Rect(float(w), float(l))
        if kind == "disc":
            return Disc(float(rest))
        if kind == "ngon":
            n, _, r = rest.partition(":")
            return regular_polygon(int(n), float(r))
        if kind == "poly":
            verts = tuple(
                (float(p.split(",")[0]), float(p.split(",")[1])) for p in rest.split(";")
            )
            return Polygon(vertices=verts)
    except (ValueError, GeometryError) as exc:
        raise GeometryError(f"bad shape spec {text!r}: {exc}") from exc
    raise GeometryError(f"unknown shape kind in {text!r}")


def local_frame(footprint: Footprint, x: float, y: float, theta: float, px, py):
    """Rotate world points into the footprint's local frame."""
    dx = np.asarray(px, dtype=np.float64) - x
    dy = np.asarray(py, dtype=np.float64) - y
    if theta:
        c, s = math.cos(-theta), math.sin(-theta)
        dx, dy = c * dx - s * dy, s * dx + c * dy
    return dx, dy


def contains_point(footprint: Footprint, x: float, y: float, theta: float, px: float, py: float) -> bool:
    dx, dy = local_frame(footprint, x, y, theta, px, py)
    return bool(footprint.contains(dx, dy))


def raster_mask(
    footprint: Footprint,
    x: float,
    y: float,
    theta: float,
    image_hw: tuple[int, int],
    ppu: float,
) -> np.ndarray:
    """Boolean mask of pixels whose centers fall strictly inside the shape."""
    h, w = image_hw
    mask = np.zeros((h, w), dtype=bool)
    r = footprint.bounding_radius
    c0 = max(0, int(math.floor((x - r) * ppu)) - 1)
    c1 = min(w, int(math.ceil((x + r) * ppu)) + 1)
    r0 = max(0, int(math.floor((y - r) * ppu)) - 1)
    r1 = min(h, int(math.ceil((y + r) * ppu)) + 1)
    if c0 >= c1 or r0 >= r1:
        return mask
    cols = np.arange(c0, c1)
    rows = np.arange(r0, r1)
    px = (cols[None, :] + 0.5) / ppu
    py = (rows[:, None] + 0.5) / ppu
    dx, dy = local_frame(footprint, x, y, theta, px, py)
    mask[r0:r1, c0:c1] = footprint.contains(dx, dy)
    return mask


def footprint_kernel(footprint: Footprint, ppu: float) -> np.ndarray:
    """Odd-sized boolean kernel of the footprint at theta=0, centered."""
    half = int(math.ceil(footprint.bounding_radius * ppu)) + 1
    size = 2 * half + 1
    idx = (np.arange(size) - half) / ppu
    dx = idx[None, :]
    dy = idx[:, None]
    kern = footprint.contains(dx, dy)
    if not kern.any():
        raise GeometryError("footprint rasterizes to an empty kernel")
    # trim all-empty borders while keeping the array odd and centered
    rows = np.any(kern, axis=1).nonzero()[0]
    cols = np.any(kern, axis=0).nonzero()[0]
    pad = min(rows[0], size - 1 - rows[-1], cols[0], size - 1 - cols[-1])
    if pad > 0:
        kern = kern[pad : size - pad, pad : size - pad]
    return kern
