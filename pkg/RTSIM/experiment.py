"""Experiment orchestration: single runs, baseline/policy pairs, sweeps, CSV tables and hit images."""
import sys
import logging
import traceback
import multiprocessing
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.stats import gmean

from .utils import ConfigError, ObjParseError, BvhError, SimulationError
from .config import apply_overrides
from .core import Core, load_scene
from .bvh import build
from .metrics import metric_row, CSV_COLUMNS, EXTRA_COLUMNS
from .prefetch_base import PrefetchPolicy

logger = logging.getLogger(__name__)

SWEEP_AXES = ('intensity', 'bfs_distance', 'arbitration', 'cache_size', 'resolution')
# axes that leave the policy-off run unchanged share one baseline
SHARED_BASELINE_AXES = ('intensity', 'bfs_distance', 'arbitration')
SWEEP_COLUMNS = CSV_COLUMNS + EXTRA_COLUMNS + ('axis', 'value', 'status')


@dataclass
class ExperimentResult:
    """Outcome of one simulation run.

    Args:
        ledger (StatsLedger): finished statistics
        hit_buffer (np.ndarray): (height, width) structured array of sample-0 primary hits
        trace (list): stack event lines, filled only when a trace was requested
    """
    ledger: object
    hit_buffer: np.ndarray
    trace: list = None


def run_experiment(config, verbose=0, trace_path=None, triangles=None, bvh=None):
    """Runs one deterministic simulation of the configured workload.

    Args:
        config (SimConfig): validated configuration
        verbose (int): 0, 1 or 2, see Core.run()
        trace_path (str, optional): writes the stack-event trace to this file
        triangles (list, optional): preloaded scene triangles
        bvh (FlatBvh, optional): prebuilt tree of `triangles`

    Returns:
        ExperimentResult: ledger, hit buffer and (when requested) the event trace
    """
    core = Core(config, triangles, bvh)
    ledger, hits = core.run(verbose=verbose)
    trace = None
    if trace_path is not None:
        core.save_trace(trace_path)
        trace = core.trace_lines()
    return ExperimentResult(ledger, hits, trace)


def run_pair(config, verbose=0, trace_path=None):
    """Runs `config` and its policy-off baseline on the same scene and BVH.

    Returns:
        tuple: (result, baseline result); both are the same object when the policy is off
    """
    triangles = load_scene(config.scene)
    bvh = build(triangles, config.scene.max_leaf_depth, config.scene.base_addr)
    result = run_experiment(config, verbose, trace_path, triangles, bvh)
    if config.prefetch.policy == PrefetchPolicy.OFF:
        return result, result
    baseline = run_experiment(config.baseline(), 0, None, triangles, bvh)
    return result, baseline


def results_table(result, baseline=None, run_id=0):
    """One-row DataFrame of a run (speedup and coverage need the baseline)."""
    baseline_ledger = baseline.ledger if baseline is not None else None
    return pd.DataFrame([metric_row(result.ledger, baseline_ledger, run_id)],
                        columns=list(CSV_COLUMNS + EXTRA_COLUMNS))


def write_csv(table, path):
    """Writes a result table with the fixed column order; absent metrics are empty cells."""
    table.to_csv(path, index=False, float_format='%.10g')
    return path


# ----------------------------------------------------------------------------------------------
# sweeps
def sweep_overrides(axis, value):
    """Configuration overrides of one sweep point.

    Args:
        axis (str): one of SWEEP_AXES
        value: intensity triple or 'n1,n2,n3'; BFS distance; 'demand-priority' or a threshold;
               L1 capacity ('64KB' or bytes); resolution (n or 'WxH')

    Returns:
        dict: {key: value} accepted by apply_overrides
    """
    if axis == 'intensity':
        return {'prefetch.intensity': value}
    if axis == 'bfs_distance':
        return {'prefetch.bfs_distance': value}
    if axis == 'arbitration':
        return {'prefetch.arbitration': value}
    if axis == 'cache_size':
        return {'l1.capacity': value}
    if axis == 'resolution':
        text = str(value).lower()
        width, _, height = text.partition('x')
        return {'width': width, 'height': height or width}
    raise ConfigError(f"unknown sweep axis '{axis}' (use one of {SWEEP_AXES}).")


def parse_sweep(text):
    """Parses '<axis>=<v1,v2,...>'; intensity triples are separated by ';' ('1,2,16;1,4,32').

    Returns:
        tuple: (axis, list of values)
    """
    if '=' not in text:
        raise ConfigError(f"sweep '{text}' must read '<axis>=<v1,v2,...>'.")
    axis, _, values = text.partition('=')
    axis = axis.strip()
    separator = ';' if axis == 'intensity' else ','
    return axis, [v.strip() for v in values.split(separator) if v.strip()]


def _run_point(job):
    """Runs one sweep job; a point that raises a package error is returned as ('failed', message)."""
    run_id, config = job
    try:
        triangles = load_scene(config.scene)
        bvh = build(triangles, config.scene.max_leaf_depth, config.scene.base_addr)
        return run_id, 'ok', run_experiment(config, triangles=triangles, bvh=bvh).ledger
    except (SimulationError, ObjParseError, BvhError, ValueError, OSError) as e:
        print(f"An exception occurred in sweep point {run_id}:")
        traceback.print_exception(*sys.exc_info())
        return run_id, 'failed', str(e)


def run_sweep(base_config, axis, values, processes=None):
    """Runs one simulation per axis value plus the policy-off baseline(s).

    Prefetcher parameters (intensity, BFS distance, arbitration) share a single baseline;
    cache size and resolution change the workload, so every point gets its own baseline.
    A point that fails with one of the package errors (or any ValueError) is reported and
    recorded with status 'failed'; the remaining points still run.

    Args:
        base_config (SimConfig): configuration of every point before the axis override
        axis (str): one of SWEEP_AXES
        values (list): axis values
        processes (int, optional): worker processes; None runs the points one after another

    Returns:
        pd.DataFrame: baseline row(s) followed by one row per value, columns SWEEP_COLUMNS
    """
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis '{axis}' (use one of {SWEEP_AXES}).")
    values = list(values)
    if len(values) == 0:
        raise ConfigError(f"sweep over '{axis}' needs at least one value.")
    if len(set(map(str, values))) != len(values):
        raise ConfigError(f"sweep over '{axis}' has repeated values.")

    points = [apply_overrides(base_config, sweep_overrides(axis, value)) for value in values]
    if axis in SHARED_BASELINE_AXES:
        baselines = [base_config.baseline()] * len(points)
        jobs = [('baseline', baselines[0])]
    else:
        baselines = [config.baseline() for config in points]
        jobs = [(f'baseline-{value}', config) for value, config in zip(values, baselines)]
    jobs += [(f'{axis}-{value}', config) for value, config in zip(values, points)]

    if processes is None or processes <= 1:
        outcomes = [_run_point(job) for job in jobs]
    else:
        with multiprocessing.Pool(processes) as pool:
            outcomes = pool.map(_run_point, jobs)
    ledgers = {run_id: (status, payload) for run_id, status, payload in outcomes}

    rows = []
    for run_id, _ in jobs:
        status, payload = ledgers[run_id]
        is_baseline = run_id.startswith('baseline')
        if is_baseline:
            index = None if axis in SHARED_BASELINE_AXES else [f'baseline-{v}' for v in values].index(run_id)
            value = None if index is None else values[index]
            baseline_id = run_id
        else:
            index = [f'{axis}-{v}' for v in values].index(run_id)
            value = values[index]
            baseline_id = 'baseline' if axis in SHARED_BASELINE_AXES else f'baseline-{value}'
        rows.append(_sweep_row(run_id, status, payload, ledgers.get(baseline_id), axis, value))
    return pd.DataFrame(rows, columns=list(SWEEP_COLUMNS))


def _sweep_row(run_id, status, payload, baseline, axis, value):
    value = value if not isinstance(value, (tuple, list)) else ",".join(str(v) for v in value)
    if status != 'ok':
        logger.warning(f"Sweep point {run_id} failed: {payload}")
        row = {column: None for column in CSV_COLUMNS + EXTRA_COLUMNS}
        row['run_id'] = run_id
    else:
        baseline_ledger = baseline[1] if baseline is not None and baseline[0] == 'ok' else None
        row = metric_row(payload, baseline_ledger, run_id)
    row.update({'axis': axis, 'value': value, 'status': status})
    return row


def geomean_speedup(table):
    """Geometric mean of speedup_vs_baseline over the successful non-baseline rows, or None."""
    rows = table[~table['run_id'].astype(str).str.startswith('baseline')]
    if 'status' in rows:
        rows = rows[rows['status'] == 'ok']
    speedups = pd.to_numeric(rows['speedup_vs_baseline'], errors='coerce').dropna()
    if len(speedups) == 0:
        return None
    return float(gmean(speedups.to_numpy()))


# ----------------------------------------------------------------------------------------------
# hit images
def primitive_colors(primitive_ids):
    """Deterministic RGB colors of primitive ids (never black)."""
    ids = np.asarray(primitive_ids, dtype=np.uint64)
    h = (ids * np.uint64(2654435761)) & np.uint64(0xFFFFFFFF)
    h ^= h >> np.uint64(15)
    rgb = np.stack([(h >> np.uint64(shift)) & np.uint64(0xFF) for shift in (16, 8, 0)], axis=-1).astype(np.uint8)
    black = np.all(rgb == 0, axis=-1)
    rgb[black] = 1
    return rgb


def dump_image(hit_buffer, path):
    """Writes a hit buffer as a binary PPM (P6); misses are black.

    Args:
        hit_buffer (np.ndarray): (height, width) structured array with 'hit' and 'primitive_id'
        path (str): output file

    Returns:
        str: path of the written file
    """
    height, width = hit_buffer.shape
    pixels = np.zeros((height, width, 3), dtype=np.uint8)
    hit = hit_buffer['hit']
    if np.any(hit):
        pixels[hit] = primitive_colors(hit_buffer['primitive_id'][hit])
    try:
        with open(path, 'wb') as f:
            f.write(f"P6\n{width} {height}\n255\n".encode('ascii'))
            f.write(pixels.tobytes())
    except OSError as e:
        raise OSError(f"Cannot write image '{path}': {e.strerror}.") from e
    return path
