"""Simulation configuration: dataclasses with defaults and the flat `key = value` file format.

Example file::

    # smaller L1 and the DFS prefetcher
    scene = synthetic:deep-branch:2048:0
    l1.capacity = 4KB
    policy = ttp-dfs
    prefetch.intensity = 1, 2, 16
"""
import os
import re
from dataclasses import dataclass, field, replace

from .utils import ConfigError, parse_size
from .memhier.cache import CacheConfig
from .memhier.dram import DramConfig
from .prefetch_base import PrefetchPolicy, PrefetchPolicyConfig, DEMAND_PRIORITY
from .rtunit.agent import RtUnitConfig, TraversalOrder
from .scene.geometry import RayMode
from .scene.synthetic import SYNTHETIC_KINDS
from .bvh.layout import DEFAULT_BASE_ADDR, SECTOR_SIZE


@dataclass
class SceneConfig:
    """Scene source.

    Args:
        source (str): OBJ path or 'synthetic:<kind>:<count>:<seed>'
        max_leaf_depth (int): BVH depth limit
        base_addr (int): byte address of the BVH image
    """
    source: str = "synthetic:random-boxes:256:0"
    max_leaf_depth: int = 32
    base_addr: int = DEFAULT_BASE_ADDR

    @property
    def synthetic(self):
        return self.source.startswith("synthetic:")

    def synthetic_spec(self):
        """Returns (kind, count, seed) of a synthetic source."""
        parts = self.source.split(":")
        if len(parts) not in (3, 4) or parts[0] != "synthetic":
            raise ConfigError(f"scene '{self.source}' must read 'synthetic:<kind>:<count>[:<seed>]'.")
        kind = parts[1]
        if kind not in SYNTHETIC_KINDS:
            raise ConfigError(f"scene kind '{kind}' is not one of {SYNTHETIC_KINDS}.")
        try:
            count = int(parts[2])
            seed = int(parts[3]) if len(parts) == 4 else 0
        except ValueError:
            raise ConfigError(f"scene '{self.source}': count and seed must be integers.") from None
        if count < 1:
            raise ConfigError(f"scene '{self.source}': count must be at least 1.")
        return kind, count, seed

    def validate(self):
        if self.synthetic:
            self.synthetic_spec()
        elif not os.path.isfile(self.source):
            raise ConfigError(f"scene file '{self.source}' does not exist.")
        if self.max_leaf_depth < 1:
            raise ConfigError(f"bvh.max_leaf_depth must be positive, got {self.max_leaf_depth}.")
        if self.base_addr < 0 or self.base_addr % SECTOR_SIZE != 0:
            raise ConfigError(f"bvh.base_addr must be a non-negative multiple of {SECTOR_SIZE}, "
                              f"got 0x{self.base_addr:x}.")


@dataclass
class CameraConfig:
    """Camera placement; without position the camera frames the scene from the +z side."""
    position: tuple = None
    look_at: tuple = None
    up: tuple = (0.0, 1.0, 0.0)
    fov_degrees: float = 60.0

    def validate(self):
        if (self.position is None) != (self.look_at is None):
            raise ConfigError("camera.position and camera.look_at must be given together.")
        if not 0.0 < self.fov_degrees < 180.0:
            raise ConfigError(f"camera.fov must be in (0, 180) degrees, got {self.fov_degrees}.")


@dataclass
class SimConfig:
    """Complete configuration of one simulation run. Defaults follow the reference hardware table."""
    scene: SceneConfig = field(default_factory=SceneConfig)
    camera: CameraConfig = field(default_factory=CameraConfig)
    width: int = 32
    height: int = 32
    samples_per_pixel: int = 1
    bounce_depth: int = 1
    rays_per_hit: int = 1
    ray_mode: RayMode = RayMode.CLOSEST_HIT
    seed: int = 0
    sm_count: int = 8
    rt: RtUnitConfig = field(default_factory=RtUnitConfig)
    l1: CacheConfig = field(default_factory=CacheConfig)
    l2: CacheConfig = field(default_factory=lambda: CacheConfig(capacity=512 * 1024, associativity=16,
                                                                latency=160, mshr_entries=768))
    dram: DramConfig = field(default_factory=DramConfig)
    prefetch: PrefetchPolicyConfig = field(default_factory=PrefetchPolicyConfig)

    def validate(self):
        """Checks every section; raises ConfigError naming the first offending key."""
        self.scene.validate()
        self.camera.validate()
        for key in ('width', 'height', 'samples_per_pixel', 'rays_per_hit', 'sm_count'):
            if getattr(self, key) < 1:
                raise ConfigError(f"{key} must be positive, got {getattr(self, key)}.")
        if self.bounce_depth < 0:
            raise ConfigError(f"bounce_depth must not be negative, got {self.bounce_depth}.")
        try:
            self.ray_mode = RayMode(self.ray_mode)
        except ValueError:
            raise ConfigError(f"ray_mode must be 'closest-hit' or 'any-hit', got '{self.ray_mode}'.") from None
        self.rt.validate()
        self.l1.validate('l1')
        self.l2.validate('l2')
        self.dram.validate()
        self.prefetch.validate()

        policy, order = self.prefetch.policy, self.rt.traversal_order
        if policy == PrefetchPolicy.TTP_BFS and order != TraversalOrder.BFS:
            raise ConfigError("policy ttp-bfs needs rt.traversal_order = bfs.")
        if policy in (PrefetchPolicy.TTP_DFS, PrefetchPolicy.PARK_LEAF) and order != TraversalOrder.DFS:
            raise ConfigError(f"policy {policy.value} needs rt.traversal_order = dfs.")
        return self

    def baseline(self):
        """Copy of the configuration with prefetching off (same workload and hardware)."""
        return replace(self, prefetch=replace(self.prefetch, policy=PrefetchPolicy.OFF))

    def copy(self):
        return replace(self, scene=replace(self.scene), camera=replace(self.camera), rt=replace(self.rt),
                       l1=replace(self.l1), l2=replace(self.l2), dram=replace(self.dram),
                       prefetch=replace(self.prefetch))


# ----------------------------------------------------------------------------------------------
# value parsers
_BOOLEANS = {'true': True, 'yes': True, '1': True, 'false': False, 'no': False, '0': False}


def _int(text):
    text = text.strip()
    if re.fullmatch(r'[+-]?0[xX][0-9a-fA-F_]+', text):
        return int(text, 16)
    return int(text)


def _bool(text):
    try:
        return _BOOLEANS[text.strip().lower()]
    except KeyError:
        raise ValueError(f"'{text}' is not a boolean") from None


def _triple(cast):
    def parse(text):
        values = [cast(v) for v in text.split(',')]
        if len(values) != 3:
            raise ValueError(f"expected 3 comma separated values, got {len(values)}")
        return tuple(values)
    return parse


def _associativity(text):
    text = text.strip().lower()
    if text in ('full', 'fully'):
        return 'full'
    return _int(text)


def _arbitration(text):
    text = text.strip().lower()
    if text == DEMAND_PRIORITY:
        return DEMAND_PRIORITY
    return _int(text)


def _text(text):
    return text.strip()


def _cache_keys(section):
    return {
        f'{section}.capacity': (section, 'capacity', parse_size),
        f'{section}.associativity': (section, 'associativity', _associativity),
        f'{section}.line_size': (section, 'line_size', parse_size),
        f'{section}.sector_size': (section, 'sector_size', parse_size),
        f'{section}.latency': (section, 'latency', _int),
        f'{section}.mshr_entries': (section, 'mshr_entries', _int),
        f'{section}.mshr_merge': (section, 'mshr_merge', _int),
    }


# key -> (section attribute or None, field name, parser)
CONFIG_KEYS = {
    'scene': ('scene', 'source', _text),
    'bvh.max_leaf_depth': ('scene', 'max_leaf_depth', _int),
    'bvh.base_addr': ('scene', 'base_addr', _int),
    'camera.position': ('camera', 'position', _triple(float)),
    'camera.look_at': ('camera', 'look_at', _triple(float)),
    'camera.up': ('camera', 'up', _triple(float)),
    'camera.fov': ('camera', 'fov_degrees', float),
    'width': (None, 'width', _int),
    'height': (None, 'height', _int),
    'samples_per_pixel': (None, 'samples_per_pixel', _int),
    'bounce_depth': (None, 'bounce_depth', _int),
    'rays_per_hit': (None, 'rays_per_hit', _int),
    'ray_mode': (None, 'ray_mode', _text),
    'seed': (None, 'seed', _int),
    'sm_count': (None, 'sm_count', _int),
    'rt.warp_size': ('rt', 'warp_size', _int),
    'rt.warp_buffer_size': ('rt', 'warp_buffer_size', _int),
    'rt.traversal_order': ('rt', 'traversal_order', _text),
    'rt.box_test_latency': ('rt', 'box_test_latency', _int),
    'rt.leaf_test_latency': ('rt', 'leaf_test_latency', _int),
    'rt.max_stack_depth': ('rt', 'max_stack_depth', _int),
    'rt.near_child_first': ('rt', 'near_child_first', _bool),
    **_cache_keys('l1'),
    **_cache_keys('l2'),
    'dram.latency': ('dram', 'latency', _int),
    'dram.requests_per_cycle': ('dram', 'requests_per_cycle', _int),
    'policy': ('prefetch', 'policy', _text),
    'prefetch.bfs_distance': ('prefetch', 'bfs_distance', _int),
    'prefetch.intensity': ('prefetch', 'intensity', _triple(int)),
    'prefetch.arbitration': ('prefetch', 'arbitration', _arbitration),
    'prefetch.queue_size': ('prefetch', 'queue_size', _int),
}


def set_value(config, key, value, line=None):
    """Parses `value` and stores it under the dotted `key`.

    Args:
        config (SimConfig): configuration to modify in place
        key (str): dotted key, e.g. 'l1.capacity'
        value (str): textual value
        line (int, optional): line number reported in errors

    Returns:
        SimConfig: the modified configuration
    """
    where = f" (line {line})" if line is not None else ""
    key = key.strip()
    if key not in CONFIG_KEYS:
        raise ConfigError(f"unknown key '{key}'{where}.")
    section, name, parse = CONFIG_KEYS[key]
    try:
        parsed = parse(str(value))
    except ValueError as e:
        raise ConfigError(f"malformed value '{str(value).strip()}' for key '{key}'{where}: {e}.") from None
    target = config if section is None else getattr(config, section)
    setattr(target, name, parsed)
    return config


def _validated(config, lines):
    """Validates and attaches the line of the offending key to the error message."""
    try:
        return config.validate()
    except ConfigError as e:
        message = str(e)
        culprit = next((key for key in lines if message.startswith(key + " ")), None)
        if culprit is None:
            culprit = next((key for key in lines if re.search(rf"(?<![\w.]){re.escape(key)}(?![\w.])", message)), None)
        if culprit is None:
            raise
        raise ConfigError(f"{message} (key '{culprit}', line {lines[culprit]})") from None


def parse_config_text(text, base=None):
    """Parses configuration text of `key = value` lines.

    Blank lines and `#` comments are ignored. Absent keys keep their defaults.

    Args:
        text (str): configuration text
        base (SimConfig, optional): configuration to start from. Defaults to SimConfig().

    Returns:
        SimConfig: validated configuration
    """
    config = base.copy() if base is not None else SimConfig()
    lines = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        content = raw.split('#', 1)[0].strip()
        if not content:
            continue
        if '=' not in content:
            raise ConfigError(f"line {number}: expected 'key = value', got '{content}'.")
        key, value = content.split('=', 1)
        key = key.strip()
        if key in lines:
            raise ConfigError(f"duplicate key '{key}' (lines {lines[key]} and {number}).")
        set_value(config, key, value, line=number)
        lines[key] = number
    return _validated(config, lines)


def parse_config(path):
    """Reads and validates a configuration file.

    Args:
        path (str): path of a `key = value` text file

    Returns:
        SimConfig: validated configuration (an empty file gives every default)
    """
    try:
        with open(path, 'r') as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read configuration file '{path}': {e.strerror}.") from None
    return parse_config_text(text)


def apply_overrides(config, overrides):
    """Returns a validated copy of `config` with `key=value` overrides applied.

    Args:
        config (SimConfig): base configuration (not modified)
        overrides (dict, list): {key: value} or ['key=value', ...]

    Returns:
        SimConfig: validated copy
    """
    if not isinstance(overrides, dict):
        pairs = {}
        for item in overrides:
            if '=' not in item:
                raise ConfigError(f"override '{item}' must read 'key=value'.")
            key, value = item.split('=', 1)
            pairs[key.strip()] = value
        overrides = pairs
    new = config.copy()
    for key, value in overrides.items():
        if isinstance(value, (tuple, list)):
            value = ",".join(str(v) for v in value)
        set_value(new, key, value)
    return new.validate()


def config_items(config):
    """Flat {key: value} view of a configuration, in CONFIG_KEYS order."""
    items = {}
    for key, (section, name, _) in CONFIG_KEYS.items():
        target = config if section is None else getattr(config, section)
        value = getattr(target, name)
        items[key] = getattr(value, 'value', value)
    return items

