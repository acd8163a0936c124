__version__ = "0.1.0"
from .utils import *
from .config import SimConfig, SceneConfig, CameraConfig, parse_config, parse_config_text, apply_overrides
from .core import Core, load_scene
from .experiment import (run_experiment, run_pair, run_sweep, results_table, write_csv, geomean_speedup,
                         dump_image, ExperimentResult)
from . import scene
from . import bvh
from . import intersect
from . import memhier
from . import prefetch
from . import rtunit
from . import metrics
