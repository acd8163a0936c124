import math

import numpy as np

from .geometry import Triangle

SYNTHETIC_KINDS = ("grid", "random-boxes", "deep-branch")

# 6 cluster directions of the deep-branch fractal, one per child of a 6-ary node
_CLUSTER_DIRECTIONS = np.array([
    [ 1.0,  0.0,  0.0], [-1.0,  0.0,  0.0],
    [ 0.0,  1.0,  0.0], [ 0.0, -1.0,  0.0],
    [ 0.0,  0.0,  1.0], [ 0.0,  0.0, -1.0],
])
_CLUSTER_SCALE = 0.45


def generate_synthetic(kind, count, seed=0):
    """Generates a deterministic synthetic triangle scene.

    Args:
        kind (str): 'grid' (triangles tiling the z=0 plane), 'random-boxes' (small random
                    triangles scattered in a cube) or 'deep-branch' (thin slivers arranged in
                    spatially nested clusters; rays hit many bounding boxes but few triangles,
                    which produces long DFS branches and long pop streaks)
        count (int): number of triangles, at least 1
        seed (int): seed of the random generator. Ignored by 'grid'.

    Returns:
        list: Triangle objects with ids 0..count-1
    """
    if count < 1:
        raise ValueError(f"Synthetic scene needs at least 1 triangle, got {count}.")

    if kind == "grid":
        vertices = _grid(count)
    elif kind == "random-boxes":
        vertices = _random_boxes(count, np.random.default_rng(seed))
    elif kind == "deep-branch":
        vertices = _deep_branch(count, np.random.default_rng(seed))
    else:
        raise ValueError(f"Unknown synthetic scene kind '{kind}'. Use one of {SYNTHETIC_KINDS}.")

    return [Triangle(v[0], v[1], v[2], id=i) for i, v in enumerate(vertices)]


def _grid(count):
    quads = math.ceil(count / 2)
    cols = math.ceil(math.sqrt(quads))
    vertices = []
    for q in range(quads):
        row, col = divmod(q, cols)
        x0, y0, x1, y1 = float(col), float(row), float(col + 1), float(row + 1)
        vertices.append(((x0, y0, 0.0), (x1, y0, 0.0), (x1, y1, 0.0)))
        vertices.append(((x0, y0, 0.0), (x1, y1, 0.0), (x0, y1, 0.0)))
    return vertices[:count]


def _random_boxes(count, rng):
    spread = max(1.0, (count / 100.0) ** (1.0 / 3.0))
    centers = rng.uniform(-spread, spread, size=(count, 3))
    offsets = rng.uniform(-0.15, 0.15, size=(count, 3, 3))
    return centers[:, None, :] + offsets


def _deep_branch(count, rng):
    levels = 1
    while 6 ** levels < count:
        levels += 1
    length = 1.5 * _CLUSTER_SCALE ** (levels - 1)
    width = 0.04 * length

    vertices = np.empty((count, 3, 3))
    for i in range(count):
        center = np.zeros(3)
        index = i
        for level in range(levels):
            index, digit = divmod(index, 6)
            center += _CLUSTER_DIRECTIONS[digit] * _CLUSTER_SCALE ** level

        along = rng.normal(size=3)
        along /= np.linalg.norm(along)
        side = np.cross(along, rng.normal(size=3))
        norm = np.linalg.norm(side)
        side = side / norm if norm > 0 else np.cross(along, [0.0, 0.0, 1.0])
        shift = rng.uniform(-0.1, 0.1) * length

        vertices[i, 0] = center - along * length / 2
        vertices[i, 1] = center + along * length / 2
        vertices[i, 2] = center + along * shift + side * width
    return vertices
