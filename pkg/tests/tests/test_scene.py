import os
import sys
sys.path.insert(0, os.path.realpath(os.path.join(os.path.dirname(__file__), '../../')))

import math

import numpy as np
import pytest

import RTSIM
from RTSIM.scene import (Triangle, Ray, RayMode, Camera, load_obj, save_obj, generate_synthetic,
                         generate_primary_rays, generate_bounce_rays, default_camera, SYNTHETIC_KINDS)
from RTSIM.intersect import HitRecord


def test_load_obj_basic(tmp_path):
    path = tmp_path / "quad.obj"
    path.write_text(
        "# unit quad\n"
        "o quad\n"
        "v 0 0 0\n"
        "v 1 0 0\n"
        "v 1 1 0\n"
        "v 0 1 0\n"
        "vn 0 0 1\n"
        "f 1/1/1 2/2/1 3/3/1\n"
        "f 1 3 4  # second half\n"
    )
    triangles = load_obj(str(path))

    assert len(triangles) == 2
    assert [tri.id for tri in triangles] == [0, 1]
    assert triangles[0].v1 == (1.0, 0.0, 0.0)
    assert triangles[1].v2 == (0.0, 1.0, 0.0)


def test_load_obj_empty_file(tmp_path):
    path = tmp_path / "empty.obj"
    path.write_text("")
    assert load_obj(str(path)) == []


@pytest.mark.parametrize("text, message", [
    ("v 0 0 0\nv 1 0 0\nf 1 2 3\n", "out of range"),
    ("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n", "non-triangular"),
    ("v 0 0 0\nv 1 0 0\nv 1 1 0\nf -3 -2 -1\n", "out of range"),
    ("v 0 0\n", "3 coordinates"),
    ("v 0 zero 0\n", "malformed vertex"),
])
def test_load_obj_errors(tmp_path, text, message):
    path = tmp_path / "bad.obj"
    path.write_text(text)
    with pytest.raises(RTSIM.ObjParseError, match=message):
        load_obj(str(path))


def test_load_obj_reports_line(tmp_path):
    path = tmp_path / "bad.obj"
    path.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\n\nf 1 2 7\n")
    with pytest.raises(RTSIM.ObjParseError, match=":5:"):
        load_obj(str(path))


def test_save_and_load_obj(tmp_path):
    triangles = generate_synthetic("random-boxes", 20, seed=1)
    path = str(tmp_path / "scene.obj")
    save_obj(triangles, path)
    loaded = load_obj(path)
    assert [tri.vertices for tri in loaded] == [tri.vertices for tri in triangles]


def test_triangle_rounds_to_float32():
    tri = Triangle((0.1, 0.0, 0.0), (1.0, 0.0, 0.0), (0.0, 1.0, 0.0), id=0)
    assert tri.v0[0] == float(np.float32(0.1))
    assert not tri.degenerate
    assert Triangle((0, 0, 0), (1, 1, 1), (2, 2, 2), id=1).degenerate


def test_triangle_rejects_non_finite():
    with pytest.raises(ValueError):
        Triangle((math.nan, 0, 0), (1, 0, 0), (0, 1, 0), id=0)


def test_ray_validation():
    with pytest.raises(ValueError):
        Ray((0, 0, 0), (0, 0, 0))
    with pytest.raises(ValueError):
        Ray((0, 0, 0), (1, 0, 0), t_max=0.0)
    ray = Ray((0, 0, 0), (2, 0, 0), mode="any-hit")
    assert ray.mode == RayMode.ANY_HIT
    assert ray.inv_direction == (0.5, None, None)


@pytest.mark.parametrize("kind", SYNTHETIC_KINDS)
def test_generate_synthetic(kind):
    a = generate_synthetic(kind, 100, seed=7)
    b = generate_synthetic(kind, 100, seed=7)

    assert len(a) == 100
    assert [tri.id for tri in a] == list(range(100))
    assert a == b


def test_generate_synthetic_seed_changes_scene():
    assert generate_synthetic("random-boxes", 50, seed=0) != generate_synthetic("random-boxes", 50, seed=1)


def test_generate_synthetic_errors():
    with pytest.raises(ValueError):
        generate_synthetic("spheres", 10)
    with pytest.raises(ValueError):
        generate_synthetic("grid", 0)


def test_primary_rays_order():
    camera = Camera(position=(0, 0, 5), look_at=(0, 0, 0), width=3, height=2)
    rays = generate_primary_rays(camera, samples_per_pixel=2)

    assert len(rays) == 3 * 2 * 2
    for ray in rays:
        assert ray.origin == (0.0, 0.0, 5.0)
        assert np.linalg.norm(ray.direction) == pytest.approx(1.0)
    # first pixel is top left, the last one bottom right
    first = rays[0].direction
    last = rays[-2].direction
    assert first[0] < 0 and first[1] > 0
    assert last[0] > 0 and last[1] < 0


def test_primary_ray_center_pixel():
    camera = Camera(position=(0, 0, 5), look_at=(0, 0, 0), width=1, height=1)
    ray, = generate_primary_rays(camera)
    assert ray.direction == pytest.approx((0.0, 0.0, -1.0))


def test_camera_validation():
    with pytest.raises(ValueError):
        Camera(width=0)
    with pytest.raises(ValueError):
        Camera(position=(0, 0, 0), look_at=(0, 0, 0))
    with pytest.raises(ValueError):
        Camera(position=(0, 0, 1), look_at=(0, 0, 0), up=(0, 0, 1))


def test_default_camera_frames_scene():
    triangles = generate_synthetic("grid", 32)
    camera = default_camera(triangles, width=4, height=4)
    lo, hi = RTSIM.scene.scene_bounds(triangles)

    assert camera.look_at == pytest.approx(tuple((lo + hi) / 2))
    assert camera.position[2] > hi[2]


def test_bounce_rays():
    hits = [
        HitRecord(hit=True, t=1.0, primitive_id=0, point=(0.0, 0.0, 0.0), normal=(0.0, 0.0, 1.0)),
        HitRecord(),
        HitRecord(hit=True, t=2.0, primitive_id=1, point=(1.0, 0.0, 0.0), normal=(1.0, 0.0, 0.0)),
    ]
    rays = generate_bounce_rays(hits, seed=3, rays_per_hit=4, mode=RayMode.ANY_HIT)

    assert len(rays) == 8
    for ray in rays[:4]:
        assert ray.direction[2] > 0
        assert ray.origin[2] > 0
        assert ray.mode == RayMode.ANY_HIT
    for ray in rays[4:]:
        assert ray.direction[0] > 0

    again = generate_bounce_rays(hits, seed=3, rays_per_hit=4, mode=RayMode.ANY_HIT)
    assert [r.direction for r in again] == [r.direction for r in rays]
