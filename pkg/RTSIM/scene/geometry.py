import math
from enum import Enum
from dataclasses import dataclass
from functools import cached_property

import numpy as np


class RayMode(str, Enum):
    """Ray query mode: search for the nearest primitive or stop at the first one found."""
    CLOSEST_HIT = "closest-hit"
    ANY_HIT = "any-hit"


def to_float32_point(point):
    """Rounds a 3-component point to 32-bit reals and returns it as a tuple of Python floats.

    Scene geometry is stored with 32-bit precision in the BVH image, so every triangle is
    rounded once on creation and the brute-force oracle sees the same numbers as the traversal.
    """
    values = np.asarray(point, dtype=np.float64).reshape(3).astype(np.float32)
    return tuple(float(v) for v in values)


@dataclass(frozen=True)
class Triangle:
    """Leaf primitive. Vertices are rounded to 32-bit reals on construction.

    Args:
        v0, v1, v2 (tuple): vertex coordinates
        id (int): unique primitive identifier
    """
    v0: tuple
    v1: tuple
    v2: tuple
    id: int

    def __post_init__(self):
        for name in ("v0", "v1", "v2"):
            point = to_float32_point(getattr(self, name))
            if not all(math.isfinite(c) for c in point):
                raise ValueError(f"Triangle {self.id} has non-finite vertex {name}: {point}.")
            object.__setattr__(self, name, point)

    @property
    def vertices(self):
        return (self.v0, self.v1, self.v2)

    @cached_property
    def normal(self):
        """Unnormalized geometric normal (e1 x e2)."""
        e1 = [self.v1[i] - self.v0[i] for i in range(3)]
        e2 = [self.v2[i] - self.v0[i] for i in range(3)]
        return (e1[1]*e2[2] - e1[2]*e2[1],
                e1[2]*e2[0] - e1[0]*e2[2],
                e1[0]*e2[1] - e1[1]*e2[0])

    @property
    def degenerate(self):
        """True for zero-area triangles. They are stored but never hit."""
        return all(c == 0.0 for c in self.normal)

    def bounds(self):
        """Returns (lo, hi) tuples of the triangle's axis-aligned bounding box."""
        lo = tuple(min(self.v0[i], self.v1[i], self.v2[i]) for i in range(3))
        hi = tuple(max(self.v0[i], self.v1[i], self.v2[i]) for i in range(3))
        return lo, hi

    def centroid(self):
        return tuple((self.v0[i] + self.v1[i] + self.v2[i]) / 3.0 for i in range(3))


@dataclass(frozen=True)
class Ray:
    """Ray with origin, direction, query mode and maximum parameter t_max."""
    origin: tuple
    direction: tuple
    mode: RayMode = RayMode.CLOSEST_HIT
    t_max: float = math.inf

    def __post_init__(self):
        object.__setattr__(self, "origin", tuple(float(c) for c in self.origin))
        object.__setattr__(self, "direction", tuple(float(c) for c in self.direction))
        object.__setattr__(self, "mode", RayMode(self.mode))
        if all(c == 0.0 for c in self.direction):
            raise ValueError("Ray direction must be non-zero.")
        if not self.t_max > 0:
            raise ValueError(f"Ray t_max must be positive, got {self.t_max}.")

    @cached_property
    def inv_direction(self):
        """Componentwise reciprocal direction; zero components map to None."""
        return tuple(1.0 / c if c != 0.0 else None for c in self.direction)

    def at(self, t):
        return tuple(self.origin[i] + t * self.direction[i] for i in range(3))


@dataclass(frozen=True)
class Camera:
    """Pinhole camera used to generate primary rays.

    Args:
        position (tuple): eye position
        look_at (tuple): point the camera looks at
        up (tuple): up vector
        fov_degrees (float): vertical field of view in degrees
        width (int): horizontal pixel count
        height (int): vertical pixel count
    """
    position: tuple = (0.0, 0.0, 1.0)
    look_at: tuple = (0.0, 0.0, 0.0)
    up: tuple = (0.0, 1.0, 0.0)
    fov_degrees: float = 60.0
    width: int = 32
    height: int = 32

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"Camera resolution must be at least 1x1, got {self.width}x{self.height}.")
        if not 0.0 < self.fov_degrees < 180.0:
            raise ValueError(f"Camera field of view must be in (0, 180) degrees, got {self.fov_degrees}.")
        forward = np.subtract(self.look_at, self.position)
        if not np.any(forward):
            raise ValueError("Camera position and look_at must differ.")
        if not np.any(np.cross(forward, self.up)):
            raise ValueError("Camera up vector must not be parallel to the view direction.")


def scene_bounds(triangles):
    """Returns (lo, hi) numpy arrays bounding all triangles."""
    points = np.array([tri.vertices for tri in triangles], dtype=np.float64).reshape(-1, 3)
    return points.min(axis=0), points.max(axis=0)


def default_camera(triangles, width=32, height=32, fov_degrees=60.0):
    """Places a camera on the +z side of the scene bounds, looking at their centre.

    Args:
        triangles (list): scene triangles
        width (int): horizontal pixel count
        height (int): vertical pixel count
        fov_degrees (float): vertical field of view

    Returns:
        Camera: camera framing the whole scene
    """
    lo, hi = scene_bounds(triangles)
    center = (lo + hi) / 2.0
    extent = float(np.max(hi - lo))
    extent = extent if extent > 0 else 1.0
    distance = 0.5 * extent / math.tan(math.radians(fov_degrees) / 2.0) + (hi[2] - center[2]) + 0.1 * extent
    position = (float(center[0]), float(center[1]), float(center[2] + distance))
    return Camera(position=position, look_at=tuple(float(c) for c in center),
                  up=(0.0, 1.0, 0.0), fov_degrees=fov_degrees, width=width, height=height)
