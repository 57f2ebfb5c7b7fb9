"""Disks, closed polylines, and containment predicates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GeometryError

__all__ = ["Disk", "point_in_polygon", "polyline_bounding_disk", "winding_number"]


@dataclass(frozen=True)
class Disk:
    """Open round disk B(center, radius)."""

    center: complex
    radius: float

    def __post_init__(self):
        if not (self.radius > 0.0 and np.isfinite(self.radius)):
            raise GeometryError(f"disk radius must be positive, got {self.radius}")
        c = complex(self.center)
        if not (np.isfinite(c.real) and np.isfinite(c.imag)):
            raise GeometryError("disk center must be finite")

    def contains(self, z, margin: float = 0.0) -> bool:
        return abs(complex(z) - self.center) < self.radius - margin

    def boundary_point(self, angle: float) -> complex:
        return self.center + self.radius * complex(np.cos(angle), np.sin(angle))

    def to_json(self) -> dict:
        return {
            "center": [self.center.real, self.center.imag],
            "radius": self.radius,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Disk":
        return cls(complex(obj["center"][0], obj["center"][1]), float(obj["radius"]))


def point_in_polygon(z: complex, vertices: np.ndarray) -> bool:
    """Even-odd test of z against the closed polyline through `vertices`.

    The polyline is implicitly closed (last vertex joins the first).  Points
    on an edge count as inside; for our uses the boundary carries a margin so
    the distinction never matters.
    """
    x, y = z.real, z.imag
    vx = vertices.real
    vy = vertices.imag
    x1, y1 = vx, vy
    x2, y2 = np.roll(vx, -1), np.roll(vy, -1)
    # edges straddling the horizontal line through y
    straddle = (y1 > y) != (y2 > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xcross = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
    hits = straddle & (xcross > x)
    return bool(np.count_nonzero(hits) % 2 == 1)


def polyline_bounding_disk(vertices: np.ndarray, inflate: float = 1.05) -> Disk:
    """Smallest centroid-centered disk covering the vertices, slightly inflated."""
    c = complex(vertices.mean())
    r = float(np.abs(vertices - c).max())
    if r == 0.0:
        r = 1e-12
    return Disk(c, r * inflate)


def winding_number(points: np.ndarray, about: complex) -> tuple[int, float]:
    """Turns of the closed polyline through `points` around `about`.

    Sums successive argument increments, each wrapped to (-pi, pi], over
    the implicitly closed loop.  Returns (nearest integer, defect), where
    defect is the distance of the raw total (in turns) from that integer.
    The caller is responsible for keeping points away from `about`; a
    vertex exactly on it yields an unusable defect, not an exception.
    """
    rel = np.asarray(points, dtype=np.complex128) - complex(about)
    ang = np.angle(rel)
    steps = np.diff(ang, append=ang[:1])
    steps = (steps + np.pi) % (2.0 * np.pi) - np.pi
    turns = float(steps.sum() / (2.0 * np.pi))
    nearest = int(np.round(turns))
    return nearest, abs(turns - nearest)
