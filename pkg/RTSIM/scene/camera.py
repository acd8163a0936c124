import math

import numpy as np

from .geometry import Ray, RayMode


def _normalized(v):
    v = np.asarray(v, dtype=np.float64)
    return v / np.linalg.norm(v)


def _pixel_offsets(samples_per_pixel):
    """Sub-pixel sample offsets in [0, 1)^2. Sample 0 is the pixel centre, the rest follow
    the R2 low-discrepancy sequence so the result does not depend on a random generator."""
    offsets = [(0.5, 0.5)]
    g = 1.32471795724474602596
    a1, a2 = 1.0 / g, 1.0 / (g * g)
    for n in range(1, samples_per_pixel):
        offsets.append(((0.5 + a1 * n) % 1.0, (0.5 + a2 * n) % 1.0))
    return offsets


def generate_primary_rays(camera, samples_per_pixel=1):
    """Generates camera rays in row-major pixel order.

    Pixel (col, row) maps to ray index (row * width + col) * samples_per_pixel + sample.
    Sample 0 passes through the pixel centre.

    Args:
        camera (Camera): camera description
        samples_per_pixel (int): rays per pixel. Defaults to 1.

    Returns:
        list: closest-hit Ray objects with unit directions
    """
    if samples_per_pixel < 1:
        raise ValueError(f"samples_per_pixel must be at least 1, got {samples_per_pixel}.")

    forward = _normalized(np.subtract(camera.look_at, camera.position))
    right = _normalized(np.cross(forward, camera.up))
    true_up = np.cross(right, forward)

    half_height = math.tan(math.radians(camera.fov_degrees) / 2.0)
    half_width = half_height * camera.width / camera.height
    origin = tuple(float(c) for c in camera.position)

    rays = []
    offsets = _pixel_offsets(samples_per_pixel)
    for row in range(camera.height):
        for col in range(camera.width):
            for dx, dy in offsets:
                x = (2.0 * (col + dx) / camera.width - 1.0) * half_width
                y = (1.0 - 2.0 * (row + dy) / camera.height) * half_height
                direction = _normalized(forward + x * right + y * true_up)
                rays.append(Ray(origin, tuple(float(c) for c in direction), RayMode.CLOSEST_HIT))
    return rays


def _orthonormal_basis(n):
    """Builds tangent vectors (t, b) so that (t, b, n) is orthonormal."""
    helper = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    t = _normalized(np.cross(helper, n))
    b = np.cross(n, t)
    return t, b


def generate_bounce_rays(hits, seed=0, rays_per_hit=1, mode=RayMode.CLOSEST_HIT, offset=1e-4):
    """Generates diffuse bounce rays from hit points.

    Directions are cosine-weighted samples of the hemisphere around the hit normal (the normal
    faces the incoming ray). Origins are moved `offset` along the normal to avoid re-hitting the
    surface that was hit. Misses produce no rays.

    Args:
        hits (list): HitRecord objects
        seed (int): seed of the random generator
        rays_per_hit (int): rays generated per hit, at least 1
        mode (RayMode): query mode of the generated rays. Defaults to closest-hit.
        offset (float): origin offset along the normal, in scene units

    Returns:
        list: Ray objects, grouped per hit in input order
    """
    if rays_per_hit < 1:
        raise ValueError(f"rays_per_hit must be at least 1, got {rays_per_hit}.")

    rng = np.random.default_rng(seed)
    rays = []
    for hit in hits:
        if not hit.hit:
            continue
        n = _normalized(hit.normal)
        t, b = _orthonormal_basis(n)
        origin = np.asarray(hit.point, dtype=np.float64) + offset * n

        u1 = rng.random(rays_per_hit)
        u2 = rng.random(rays_per_hit)
        radius = np.sqrt(u1)
        phi = 2.0 * math.pi * u2
        local_z = np.sqrt(1.0 - u1)  # in (0, 1] because u1 < 1

        for i in range(rays_per_hit):
            d = radius[i] * math.cos(phi[i]) * t + radius[i] * math.sin(phi[i]) * b + local_z[i] * n
            d = _normalized(d)
            rays.append(Ray(tuple(float(c) for c in origin), tuple(float(c) for c in d), mode))
    return rays
