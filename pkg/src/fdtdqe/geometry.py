"""Geometric primitives used to paint materials onto Yee sample points.

All coordinates are physical (metres); boxes and slabs are half-open,
lower face included. A primitive answers ``contains(x, y, z)``
for broadcastable coordinate arrays; the engine calls it with the positions
of each E-component sample.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_AXES = {"x": 0, "y": 1, "z": 2}

# faces that coincide with a sample up to unit-conversion round-off are
# treated as lying exactly on it (far below any lattice spacing)
_FACE_TOL = 1e-15


def _in_interval(p, lo, hi):
    return (p >= lo - _FACE_TOL) & (p < hi - _FACE_TOL)


@dataclass(frozen=True)
class Box:
    lo: tuple[float, float, float]
    hi: tuple[float, float, float]

    def contains(self, x, y, z):
        p = (x, y, z)
        inside = True
        for a in range(3):
            inside = inside & _in_interval(p[a], self.lo[a], self.hi[a])
        return inside


@dataclass(frozen=True)
class Slab:
    """Infinite slab between ``start`` and ``end`` along ``axis``."""

    axis: str
    start: float
    end: float

    def contains(self, x, y, z):
        p = (x, y, z)[_AXES[self.axis]]
        return _in_interval(p, self.start, self.end)


@dataclass(frozen=True)
class Sphere:
    center: tuple[float, float, float]
    radius: float

    def contains(self, x, y, z):
        cx, cy, cz = self.center
        return (x - cx) ** 2 + (y - cy) ** 2 + (z - cz) ** 2 <= self.radius**2


@dataclass(frozen=True)
class CylinderSector:
    """Annular sector of a cylinder, e.g. a staircased concave mirror.

    ``axis`` is the cylinder axis, ``center`` a point on it. Points belong to
    the sector when their distance from the axis lies in
    [inner_radius, outer_radius] and their direction (perpendicular to the
    axis) is within ``half_angle_deg`` of ``facing``.
    """

    axis: str
    center: tuple[float, float, float]
    inner_radius: float
    outer_radius: float
    facing: tuple[float, float, float]
    half_angle_deg: float

    def contains(self, x, y, z):
        a = _AXES[self.axis]
        rel = [x - self.center[0], y - self.center[1], z - self.center[2]]
        rel[a] = 0.0 * rel[a]
        f = np.array(self.facing, dtype=float)
        f[a] = 0.0
        f /= np.linalg.norm(f)
        r = np.sqrt(rel[0] ** 2 + rel[1] ** 2 + rel[2] ** 2)
        along = rel[0] * f[0] + rel[1] * f[1] + rel[2] * f[2]
        with np.errstate(invalid="ignore", divide="ignore"):
            cos_t = np.where(r > 0, along / np.where(r > 0, r, 1.0), 1.0)
        in_ring = (r >= self.inner_radius) & (r <= self.outer_radius)
        return in_ring & (cos_t >= np.cos(np.radians(self.half_angle_deg)))


def make_shape(kind: str, **kw):
    kinds = {"box": Box, "slab": Slab, "sphere": Sphere,
             "cylinder_sector": CylinderSector}
    if kind not in kinds:
        raise ValueError(f"unknown shape {kind!r}; expected one of {sorted(kinds)}")
    return kinds[kind](**kw)
