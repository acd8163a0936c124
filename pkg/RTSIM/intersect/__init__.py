from .kernels import (HitRecord, MISS, ray_box_test, ray_triangle_test, make_hit,
                      brute_force_closest, TriangleSoup, DET_EPSILON, T_MIN)
