"""Geometric kernels: ray/box slab test, Möller-Trumbore ray/triangle test and the
brute-force closest-hit oracle.

Epsilon policy (one place for the whole simulator):

- DET_EPSILON: |det| below this value means the ray is parallel to the triangle plane
  (or the triangle is degenerate) and the test reports no hit.
- T_MIN: hits at t <= T_MIN are ignored so bounce rays do not re-hit their own surface.
- BOX_ROBUST_SCALE: the far slab distance is scaled up by 1 + 2*gamma(3) so rounding
  never rejects a box whose primitive is hit.
- BOX_NEAR_SCALE: the entry distance is scaled down so a box is entered strictly before any
  hit on its surface, also for flat boxes of axis-aligned triangles. Boxes are then never
  culled by a hit at the same distance and equal-t primitives all reach the tie-break.
"""
import math
from dataclasses import dataclass

import numpy as np

DET_EPSILON = 1e-7
T_MIN = 1e-6
_MACHINE_EPSILON = 2.0**-53
BOX_ROBUST_SCALE = 1.0 + 2.0 * (3 * _MACHINE_EPSILON) / (1 - 3 * _MACHINE_EPSILON)
BOX_NEAR_SCALE = 1.0 - 2.0**-32


@dataclass(frozen=True)
class HitRecord:
    """Result of a ray query. When `hit` is False the other fields carry no meaning."""
    hit: bool = False
    t: float = math.inf
    primitive_id: int = -1
    point: tuple = None
    normal: tuple = None


MISS = HitRecord()


def ray_box_test(ray, box):
    """Slab test of a ray segment [0, t_max] against an axis-aligned box.

    Args:
        ray (Ray): the ray
        box (Aabb): the box. Empty boxes are never hit.

    Returns:
        float or None: entry distance t >= 0 (0 when the origin is inside), None on a miss
    """
    if box.empty:
        return None
    t_near = 0.0
    t_far = ray.t_max
    origin = ray.origin
    inv = ray.inv_direction
    lo = box.lo
    hi = box.hi
    for axis in range(3):
        inv_d = inv[axis]
        if inv_d is None:
            if origin[axis] < lo[axis] or origin[axis] > hi[axis]:
                return None
            continue
        t0 = (lo[axis] - origin[axis]) * inv_d
        t1 = (hi[axis] - origin[axis]) * inv_d
        if t0 > t1:
            t0, t1 = t1, t0
        t1 *= BOX_ROBUST_SCALE
        if t0 > t_near:
            t_near = t0
        if t1 < t_far:
            t_far = t1
        if t_near > t_far:
            return None
    return t_near * BOX_NEAR_SCALE


def ray_triangle_test(ray, tri):
    """Möller-Trumbore ray/triangle test.

    Args:
        ray (Ray): the ray
        tri (Triangle): the triangle; degenerate triangles never hit

    Returns:
        float or None: hit distance t in (T_MIN, t_max], None on a miss
    """
    ox, oy, oz = ray.origin
    dx, dy, dz = ray.direction
    (v0x, v0y, v0z), (v1x, v1y, v1z), (v2x, v2y, v2z) = tri.vertices

    e1x, e1y, e1z = v1x - v0x, v1y - v0y, v1z - v0z
    e2x, e2y, e2z = v2x - v0x, v2y - v0y, v2z - v0z
    px = dy*e2z - dz*e2y
    py = dz*e2x - dx*e2z
    pz = dx*e2y - dy*e2x
    det = e1x*px + e1y*py + e1z*pz
    if abs(det) < DET_EPSILON:
        return None
    inv_det = 1.0 / det

    sx, sy, sz = ox - v0x, oy - v0y, oz - v0z
    u = (sx*px + sy*py + sz*pz) * inv_det
    if u < 0.0 or u > 1.0:
        return None

    qx = sy*e1z - sz*e1y
    qy = sz*e1x - sx*e1z
    qz = sx*e1y - sy*e1x
    v = (dx*qx + dy*qy + dz*qz) * inv_det
    if v < 0.0 or u + v > 1.0:
        return None

    t = (e2x*qx + e2y*qy + e2z*qz) * inv_det
    if t <= T_MIN or t > ray.t_max:
        return None
    return t


def make_hit(ray, tri, t):
    """Builds the HitRecord of `ray` hitting `tri` at distance `t`. The normal faces the ray."""
    nx, ny, nz = tri.normal
    length = math.sqrt(nx*nx + ny*ny + nz*nz)
    normal = (nx / length, ny / length, nz / length)
    d = ray.direction
    if normal[0]*d[0] + normal[1]*d[1] + normal[2]*d[2] > 0.0:
        normal = (-normal[0], -normal[1], -normal[2])
    return HitRecord(hit=True, t=t, primitive_id=tri.id, point=ray.at(t), normal=normal)


class TriangleSoup:
    """Triangles packed into numpy arrays for the vectorized brute-force oracle.

    Args:
        triangles (list): Triangle objects
    """
    def __init__(self, triangles):
        self.triangles = list(triangles)
        vertices = np.array([tri.vertices for tri in self.triangles], dtype=np.float64).reshape(-1, 3, 3)
        self.v0 = vertices[:, 0, :].T.copy()
        self.v1 = vertices[:, 1, :].T.copy()
        self.v2 = vertices[:, 2, :].T.copy()
        self.ids = np.array([tri.id for tri in self.triangles], dtype=np.int64)

    def __len__(self):
        return len(self.triangles)


def brute_force_closest(ray, triangles):
    """Tests every triangle and returns the closest hit; ties on t go to the smaller primitive id.

    The arithmetic is the same sequence of IEEE operations as ray_triangle_test, so distances are
    bit-identical to the ones found by BVH traversal.

    Args:
        ray (Ray): the ray
        triangles (list, TriangleSoup): candidate triangles

    Returns:
        HitRecord: closest hit, or a miss record
    """
    soup = triangles if isinstance(triangles, TriangleSoup) else TriangleSoup(triangles)
    if len(soup) == 0:
        return MISS

    ox, oy, oz = ray.origin
    dx, dy, dz = ray.direction
    v0x, v0y, v0z = soup.v0
    v1x, v1y, v1z = soup.v1
    v2x, v2y, v2z = soup.v2

    with np.errstate(divide='ignore', invalid='ignore'):
        e1x, e1y, e1z = v1x - v0x, v1y - v0y, v1z - v0z
        e2x, e2y, e2z = v2x - v0x, v2y - v0y, v2z - v0z
        px = dy*e2z - dz*e2y
        py = dz*e2x - dx*e2z
        pz = dx*e2y - dy*e2x
        det = e1x*px + e1y*py + e1z*pz
        inv_det = 1.0 / det

        sx, sy, sz = ox - v0x, oy - v0y, oz - v0z
        u = (sx*px + sy*py + sz*pz) * inv_det
        qx = sy*e1z - sz*e1y
        qy = sz*e1x - sx*e1z
        qz = sx*e1y - sy*e1x
        v = (dx*qx + dy*qy + dz*qz) * inv_det
        t = (e2x*qx + e2y*qy + e2z*qz) * inv_det

        valid = ((np.abs(det) >= DET_EPSILON)
                 & (u >= 0.0) & (u <= 1.0)
                 & (v >= 0.0) & (u + v <= 1.0)
                 & (t > T_MIN) & (t <= ray.t_max))

    candidates = np.flatnonzero(valid)
    if len(candidates) == 0:
        return MISS
    order = np.lexsort((soup.ids[candidates], t[candidates]))
    best = candidates[order[0]]
    return make_hit(ray, soup.triangles[best], float(t[best]))
