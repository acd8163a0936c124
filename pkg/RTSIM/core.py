import os
import pickle
import datetime
import itertools

import numpy as np
import pandas as pd
from beautifultable import BeautifulTable

from .utils import SimulationError, format_size
from .config import SimConfig
from .scene import load_obj, generate_synthetic, default_camera, generate_primary_rays, generate_bounce_rays
from .scene.geometry import Camera
from .bvh import build, tree_stats
from .memhier import MemoryHierarchy
from .metrics import StatsLedger, check_identities, metric_row, accuracy, mpki
from .prefetch_base import make_prefetcher
from .rtunit import RtUnit, Warp, TraversalAgent, check_drained

HIT_DTYPE = np.dtype([('hit', np.bool_), ('primitive_id', np.int64), ('t', np.float64)])


def load_scene(scene_config):
    """Loads the triangles of an OBJ file or generates a synthetic scene.

    Args:
        scene_config (SceneConfig): scene source

    Returns:
        list: Triangle objects
    """
    if scene_config.synthetic:
        kind, count, seed = scene_config.synthetic_spec()
        return generate_synthetic(kind, count, seed)
    return load_obj(scene_config.source)


def make_camera(config, triangles):
    if config.camera.position is None:
        return default_camera(triangles, config.width, config.height, config.camera.fov_degrees)
    return Camera(position=config.camera.position, look_at=config.camera.look_at, up=config.camera.up,
                  fov_degrees=config.camera.fov_degrees, width=config.width, height=config.height)


class Core():
    def __init__(self, config=None, triangles=None, bvh=None):
        """
        Initializes the simulator: loads the scene, builds the BVH image and creates the memory
        hierarchy and one RT unit per SM.

        Args:
            config (SimConfig): simulation configuration, validated here. Defaults to SimConfig().
            triangles (list, optional): scene triangles; loaded from config.scene when None.
            bvh (FlatBvh, optional): prebuilt tree for `triangles`; built when None.
        """
        self.config = (config if config is not None else SimConfig()).validate()
        self.triangles = triangles if triangles is not None else load_scene(self.config.scene)
        self.bvh = bvh if bvh is not None else build(self.triangles, self.config.scene.max_leaf_depth,
                                                     self.config.scene.base_addr)
        self.reset()

    def __repr__(self):
        config = self.config
        string = "RT units:\n"
        string += f"\t{config.sm_count} x warp buffer {config.rt.warp_buffer_size}, warp size {config.rt.warp_size}, "
        string += f"{config.rt.traversal_order.value}\n"
        string += "Memory:\n"
        for name, cache in (("L1", config.l1), ("L2", config.l2)):
            string += f"\t{name}: {format_size(cache.capacity)}, {cache.associativity}-way, {cache.latency} cycles\n"
        string += f"\tDRAM: {config.dram.latency} cycles\n"
        string += f"Prefetch policy:\n\t{config.prefetch.policy.value}\n"
        return string

    def reset(self):
        """Cold caches, empty ledger, cycle 0."""
        config = self.config
        self.hierarchy = MemoryHierarchy(config.l1, config.l2, config.dram, config.sm_count)
        self.ledger = StatsLedger(config.prefetch.policy, config.rt.traversal_order)
        self.events = []
        self.rt_units = [RtUnit(sm, self.bvh, self.hierarchy, self.ledger, config.rt, config.prefetch, self.events)
                         for sm in range(config.sm_count)]
        self.cycle = 0
        self._thread_ids = itertools.count()
        self._warp_ids = itertools.count()
        self.hit_buffer = None
        self.finished = False

    def _make_warps(self, rays):
        rt = self.config.rt
        agents = [TraversalAgent(next(self._thread_ids), ray, rt.traversal_order,
                                 make_prefetcher(self.config.prefetch, rt.leaf_test_latency),
                                 rt.max_stack_depth, rt.box_test_latency, rt.leaf_test_latency,
                                 rt.near_child_first)
                  for ray in rays]
        warps = []
        for i in range(0, len(agents), rt.warp_size):
            sm = len(warps) % self.config.sm_count
            warps.append(Warp(next(self._warp_ids), agents[i:i + rt.warp_size], sm))
        return agents, warps

    def run_batch(self, rays):
        """Traces a batch of rays through the RT units until every ray is done.

        The memory hierarchy keeps its state between batches.

        Args:
            rays (list): Ray objects

        Returns:
            list: HitRecord objects in ray order
        """
        if self.finished:
            raise SimulationError("The simulation has been finished; call reset() first.")
        agents, warps = self._make_warps(rays)
        for warp in warps:
            self.rt_units[warp.sm].assign(warp)

        start = cycle = self.cycle
        while any(unit.busy for unit in self.rt_units):
            responses = {}
            for request in self.hierarchy.advance(cycle):
                responses.setdefault(request.sm, []).append(request)
            for unit in self.rt_units:
                unit.step(cycle, responses.get(unit.sm, ()))

            candidates = [unit.next_activity(cycle) for unit in self.rt_units]
            candidates.append(self.hierarchy.next_event_cycle())
            candidates = [c for c in candidates if c is not None]
            busy = any(unit.busy for unit in self.rt_units)
            if busy and not candidates:
                raise SimulationError(f"Deadlock at cycle {cycle}: RT units wait for memory that never responds.")
            following = max(min(candidates), cycle + 1) if candidates else cycle + 1

            counts = {}
            for unit in self.rt_units:
                for status, n in unit.status_counts().items():
                    counts[status] = counts.get(status, 0) + n
            self.ledger.record_status(counts, (following if busy else cycle + 1) - cycle)
            if not busy:
                break
            cycle = following

        self.cycle = cycle + 1 if agents else self.cycle
        self.ledger.record_batch(start, self.cycle)
        return [agent.best for agent in agents]

    def finish(self):
        """Drains outstanding memory traffic, collects the cache counters and checks the
        conservation identities.

        Returns:
            StatsLedger: the finished ledger
        """
        if not self.finished:
            _, responses = self.hierarchy.drain()
            check_drained(responses)
            self.ledger.collect(self.hierarchy)
            check_identities(self.ledger)
            self.finished = True
        return self.ledger

    def run(self, verbose=0):
        """
        Runs the whole workload: primary rays as one batch, then one batch per bounce generation,
        each traced from the hits of the previous batch.

        Args:
            verbose (int): 0 (print nothing), 1 (print status) or 2 (print status and the summary
                           table). Default is 0.

        Returns:
            tuple: (StatsLedger, hit buffer) where the hit buffer is a (height, width) structured
                   array with fields 'hit', 'primitive_id' and 't' (sample 0 of each pixel)
        """
        config = self.config
        self.verbose = verbose
        if self.verbose in [1, 2]:
            stats = tree_stats(self.bvh)
            print(f"Scene: {len(self.triangles)} triangles, BVH {stats['internal_nodes']} internal + "
                  f"{stats['leaf_nodes']} leaf nodes ({format_size(stats['size_bytes'])}), depth {stats['max_depth']}")

        camera = make_camera(config, self.triangles)
        rays = generate_primary_rays(camera, config.samples_per_pixel)
        hits = self.run_batch(rays)
        self._print_batch("primary", rays)
        primary = hits[::config.samples_per_pixel]

        for depth in range(1, config.bounce_depth + 1):
            rays = generate_bounce_rays(hits, seed=config.seed + depth, rays_per_hit=config.rays_per_hit,
                                        mode=config.ray_mode)
            if not rays:
                break
            hits = self.run_batch(rays)
            self._print_batch(f"bounce {depth}", rays)

        self.finish()
        self.hit_buffer = hit_buffer(primary, config.width, config.height)
        if self.verbose in [1, 2]:
            print('Simulation finished.')
        if self.verbose == 2:
            self._print_table()
        return self.ledger, self.hit_buffer

    def _print_batch(self, name, rays):
        if getattr(self, 'verbose', 0) in [1, 2]:
            start, end = self.ledger.batches[-1]
            print(f"Batch {name}: {len(rays)} rays, {end - start} cycles")

    def _print_table(self):
        """Prints the main metrics of the finished run with the BeautifulTable library."""
        ledger = self.ledger
        table = BeautifulTable()
        table.rows.append(["policy", ledger.policy])
        table.rows.append(["cycles", ledger.cycles])
        table.rows.append(["rays", ledger.rays])
        table.rows.append(["avg nodes per ray", f"{ledger.avg_nodes_per_ray:.2f}"])
        for level in ('l1', 'l2'):
            value = accuracy(ledger, level)
            table.rows.append([f"{level} accuracy", "-" if value is None else f"{value:.4f}"])
            table.rows.append([f"{level} mpki", f"{mpki(ledger, level):.2f}"])
        table.rows.append(["dram reads", ledger.dram_reads])
        table.rows.append(["dram bw util", f"{ledger.dram_bw_util:.4f}"])
        table.columns.header = ["METRIC", "VALUE"]
        print(table)

    def trace_lines(self):
        """Stack events of the run as text lines 'cycle thread_id push|pop 0xADDR'."""
        return [str(event) for event in self.events]

    def save_trace(self, path):
        with open(path, 'w') as f:
            for line in self.trace_lines():
                f.write(line + "\n")
        return path

    def save_results(self, name='Run', root='', timestamp=True, comment=None):
        """Saves configuration, ledger, hit buffer and the result row as a pickle file.

        Args:
            name (str, optional): filename. Defaults to 'Run'.
            root (str, optional): directory to save to. Defaults to ''.
            timestamp (bool, optional): include timestamp before 'filename'. Defaults to True.
            comment (str, optional): comment on the saved file. Defaults to None.

        Returns:
            str: path to the saved file
        """
        ledger = self.finish()
        results = {
            'config': self.config,
            'ledger': ledger,
            'hit_buffer': self.hit_buffer,
            'table': pd.DataFrame([metric_row(ledger, run_id=name)]),
        }
        if comment is not None:
            results['comment'] = comment

        if not os.path.exists(root) and root != '':
            os.mkdir(root)

        if timestamp:
            now = datetime.datetime.now()
            stamp = f'{now.strftime("%Y%m%d_%H%M%S")}_'
        else:
            stamp = ''

        path = os.path.join(root, f'{stamp}{name}.pkl')
        with open(path, 'wb') as f:
            pickle.dump(results, f, protocol=-1)
        return path


def hit_buffer(hits, width, height):
    """Packs per-pixel HitRecords (row-major) into a (height, width) structured array."""
    buffer = np.zeros((height, width), dtype=HIT_DTYPE)
    flat = buffer.reshape(-1)
    for i, hit in enumerate(hits[:width * height]):
        flat[i] = (hit.hit, hit.primitive_id if hit.hit else -1, hit.t if hit.hit else np.inf)
    return buffer

