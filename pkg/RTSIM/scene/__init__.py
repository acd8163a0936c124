from .geometry import Triangle, Ray, RayMode, Camera, default_camera, scene_bounds
from .obj import load_obj, save_obj
from .synthetic import generate_synthetic, SYNTHETIC_KINDS
from .camera import generate_primary_rays, generate_bounce_rays
