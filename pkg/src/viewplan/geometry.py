"""Core geometric types and the placement <-> search-vector encoding."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

__all__ = [
    "Point3",
    "CameraPose",
    "Placement",
    "PointCloud",
    "SearchSpace",
    "angle_cosine",
    "encode",
    "decode",
]

_TWO_PI = 2.0 * math.pi


def _as_vec3(value) -> np.ndarray:
    v = np.asarray(value, dtype=float).reshape(3)
    if not np.all(np.isfinite(v)):
        raise ValueError("coordinates must be finite")
    return v


@dataclass(frozen=True)
class Point3:
    """A point in 3D space, meters."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        for c in (self.x, self.y, self.z):
            if not math.isfinite(c):
                raise ValueError("coordinates must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    @classmethod
    def from_array(cls, arr) -> "Point3":
        v = _as_vec3(arr)
        return cls(float(v[0]), float(v[1]), float(v[2]))


def angle_cosine(a, b) -> float:
    """Cosine of the angle between two vectors, clamped to [-1, 1].

    Raises ValueError if either vector is (numerically) zero.
    """
    av = np.asarray(a, dtype=float).reshape(-1)
    bv = np.asarray(b, dtype=float).reshape(-1)
    na = float(np.linalg.norm(av))
    nb = float(np.linalg.norm(bv))
    if na < 1e-12 or nb < 1e-12:
        raise ValueError("angle undefined for zero-length vector")
    c = float(np.dot(av, bv)) / (na * nb)
    return min(1.0, max(-1.0, c))


@dataclass(frozen=True)
class CameraPose:
    """Camera position plus its unit view axis.

    Sign convention: ``orientation`` is the axis for which in-view points p
    satisfy angle_cosine(position - p, orientation) >= cos(fov/2), i.e. it
    points from the viewed scene back toward the camera. Use
    :meth:`looking_at` to build a pose from the everyday "camera looks at
    target" description; it stores the negated viewing direction so the
    target ends up in view.
    """

    position: Point3
    orientation: Point3

    def __post_init__(self):
        o = self.orientation.as_array()
        n = float(np.linalg.norm(o))
        if n < 1e-12:
            raise ValueError("orientation must be a nonzero vector")
        if abs(n - 1.0) > 1e-12:
            o = o / n
            object.__setattr__(self, "orientation", Point3.from_array(o))

    @classmethod
    def looking_at(cls, position, target) -> "CameraPose":
        """Pose at ``position`` whose view cone is centered on ``target``."""
        p = _as_vec3(position if not isinstance(position, Point3) else position.as_array())
        t = _as_vec3(target if not isinstance(target, Point3) else target.as_array())
        axis = p - t
        if float(np.linalg.norm(axis)) < 1e-12:
            raise ValueError("camera position coincides with look-at target")
        return cls(Point3.from_array(p), Point3.from_array(axis))

    def viewing_direction(self) -> np.ndarray:
        """Unit vector from the camera into the scene (negated view axis)."""
        return -self.orientation.as_array()


@dataclass(frozen=True)
class Placement:
    """An ordered tuple of N >= 2 camera poses."""

    cameras: Tuple[CameraPose, ...]

    def __post_init__(self):
        cams = tuple(self.cameras)
        if len(cams) < 2:
            raise ValueError("a placement needs at least two cameras")
        object.__setattr__(self, "cameras", cams)

    def __len__(self) -> int:
        return len(self.cameras)

    def positions(self) -> np.ndarray:
        """(N, 3) array of camera positions."""
        return np.array([c.position.as_array() for c in self.cameras])

    def orientations(self) -> np.ndarray:
        """(N, 3) array of unit view axes."""
        return np.array([c.orientation.as_array() for c in self.cameras])


class PointCloud:
    """Ordered set of 3D points, optionally segmented into plants.

    ``plant_ranges`` is a tuple of (start, stop) index pairs covering the
    points in order; it survives noise application so per-plant operations
    stay well defined on perturbed clouds.
    """

    __slots__ = ("points", "plant_ranges")

    def __init__(self, points, plant_ranges: Optional[Sequence[Tuple[int, int]]] = None):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError("points must have shape (n, 3)")
        if pts.shape[0] < 1:
            raise ValueError("point cloud must contain at least one point")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        pts = pts.copy()
        pts.setflags(write=False)
        self.points = pts
        if plant_ranges is not None:
            ranges = tuple((int(a), int(b)) for a, b in plant_ranges)
            stop = 0
            for a, b in ranges:
                if a != stop or b <= a:
                    raise ValueError("plant ranges must be contiguous and nonempty")
                stop = b
            if stop != pts.shape[0]:
                raise ValueError("plant ranges must cover all points")
            self.plant_ranges = ranges
        else:
            self.plant_ranges = ((0, pts.shape[0]),)

    def __len__(self) -> int:
        return int(self.points.shape[0])

    def centroid(self) -> np.ndarray:
        return self.points.mean(axis=0)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PointCloud):
            return NotImplemented
        return (
            self.plant_ranges == other.plant_ranges
            and self.points.shape == other.points.shape
            and bool(np.array_equal(self.points, other.points))
        )


@dataclass(frozen=True)
class SearchSpace:
    """Axis-aligned box of allowed camera positions.

    Angles are not part of the box: azimuth always spans [0, 2*pi) and
    elevation [-pi/2, pi/2].
    """

    lower: Tuple[float, float, float]
    upper: Tuple[float, float, float]

    def __post_init__(self):
        lo = _as_vec3(self.lower)
        hi = _as_vec3(self.upper)
        if not np.all(lo < hi):
            raise ValueError("lower bounds must be strictly below upper bounds")
        object.__setattr__(self, "lower", tuple(float(v) for v in lo))
        object.__setattr__(self, "upper", tuple(float(v) for v in hi))

    @classmethod
    def default(cls) -> "SearchSpace":
        return cls((-2.5, -2.5, 0.05), (2.5, 2.5, 1.2))

    def extent(self) -> np.ndarray:
        return np.array(self.upper) - np.array(self.lower)

    def contains(self, position) -> bool:
        p = _as_vec3(position)
        return bool(np.all(p >= np.array(self.lower)) and np.all(p <= np.array(self.upper)))


def encode(placement: Placement, space: SearchSpace) -> np.ndarray:
    """Flatten a placement into a vector in [0, 1]^(5N).

    Per camera: scaled x, y, z, then azimuth / 2pi and (elevation + pi/2) / pi
    of the view axis. Raises ValueError if a position leaves the box.
    """
    lo = np.array(space.lower)
    ext = space.extent()
    out = np.empty(5 * len(placement))
    for k, cam in enumerate(placement.cameras):
        p = cam.position.as_array()
        if np.any(p < lo - 1e-12) or np.any(p > lo + ext + 1e-12):
            raise ValueError("camera position outside the search box")
        o = cam.orientation.as_array()
        az = math.atan2(o[1], o[0])
        if az < 0.0:
            az += _TWO_PI
        el = math.asin(min(1.0, max(-1.0, float(o[2]))))
        out[5 * k : 5 * k + 3] = (p - lo) / ext
        out[5 * k + 3] = az / _TWO_PI
        out[5 * k + 4] = (el + 0.5 * math.pi) / math.pi
    return out


def decode(vector, space: SearchSpace) -> Placement:
    """Inverse of :func:`encode`; raises ValueError on a bad dimension."""
    v = np.asarray(vector, dtype=float).reshape(-1)
    if v.size % 5 != 0 or v.size < 10:
        raise ValueError("encoded placement length must be 5N with N >= 2")
    lo = np.array(space.lower)
    ext = space.extent()
    cams = []
    for k in range(v.size // 5):
        chunk = v[5 * k : 5 * (k + 1)]
        pos = lo + chunk[:3] * ext
        az = chunk[3] * _TWO_PI
        el = chunk[4] * math.pi - 0.5 * math.pi
        ce = math.cos(el)
        axis = (ce * math.cos(az), ce * math.sin(az), math.sin(el))
        cams.append(CameraPose(Point3.from_array(pos), Point3(*axis)))
    return Placement(tuple(cams))
