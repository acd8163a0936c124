"""End-to-end properties of the simulator: oracle equivalence, timing-only prefetching,
limit modes, trends of the prefetch policies, conservation and determinism."""
import os
import sys
sys.path.insert(0, os.path.realpath(os.path.join(os.path.dirname(__file__), '../../')))

import pytest

import RTSIM
from RTSIM.config import apply_overrides
from RTSIM.bvh import build
from RTSIM.experiment import run_pair, run_experiment, results_table, write_csv, dump_image
from RTSIM.intersect import brute_force_closest, TriangleSoup
from RTSIM.memhier import Category
from RTSIM.metrics import accuracy, coverage, pop_streak_classes, pop_streak_histogram
from RTSIM.rtunit import trace_ray, TraversalOrder
from RTSIM.scene import generate_synthetic, default_camera, generate_primary_rays, generate_bounce_rays


def read_bytes(path):
    with open(path, 'rb') as f:
        return f.read()


# ----------------------------------------------------------------------------------------------
@pytest.mark.parametrize("seed", range(20))
def test_dfs_traversal_matches_brute_force(seed):
    count = 50 + 450 * seed // 19
    triangles = generate_synthetic("random-boxes", count, seed=seed)
    bvh = build(triangles)
    soup = TriangleSoup(triangles)

    primary = generate_primary_rays(default_camera(triangles, 32, 32))
    hits = [trace_ray(ray, bvh).hit for ray in primary]
    bounce = generate_bounce_rays(hits, seed=seed)
    rays = primary + bounce
    hits += [trace_ray(ray, bvh).hit for ray in bounce]
    assert len(rays) >= 1024

    for ray, hit in zip(rays, hits):
        expected = brute_force_closest(ray, soup)
        assert hit.hit == expected.hit
        if hit.hit:
            assert hit.primitive_id == expected.primitive_id
            assert hit.t == pytest.approx(expected.t, rel=1e-5)


# ----------------------------------------------------------------------------------------------
POLICY_MATRIX = [
    {'policy': 'ttp-dfs'},
    {'policy': 'ttp-dfs', 'prefetch.arbitration': 25},
    {'policy': 'park-leaf'},
    {'policy': 'perfect-upward'},
    {'policy': 'perfect-downward'},
    {'policy': 'ttp-bfs', 'rt.traversal_order': 'bfs', 'rt.max_stack_depth': 4096},
    {'policy': 'ttp-bfs', 'rt.traversal_order': 'bfs', 'rt.max_stack_depth': 4096, 'prefetch.arbitration': 50},
]


@pytest.mark.parametrize("scene", ["synthetic:random-boxes:128:3", "synthetic:deep-branch:216:1"])
def test_prefetching_does_not_change_the_image(tmp_path, small_config, scene):
    base = apply_overrides(small_config, {'scene': scene, 'rt.max_stack_depth': 256})
    reference = read_bytes(dump_image(run_experiment(base).hit_buffer, str(tmp_path / "off.ppm")))

    for i, overrides in enumerate(POLICY_MATRIX):
        result = run_experiment(apply_overrides(base, overrides))
        image = read_bytes(dump_image(result.hit_buffer, str(tmp_path / f"{i}.ppm")))
        assert image == reference, f"image differs for {overrides}"


def test_runs_are_reproducible(tmp_path, small_config):
    config = apply_overrides(small_config, {'policy': 'ttp-dfs'})
    outputs = []
    for i in range(3):
        trace = str(tmp_path / f"trace{i}.txt")
        result, baseline = run_pair(config, trace_path=trace)
        csv = write_csv(results_table(result, baseline, run_id='ttp'), str(tmp_path / f"run{i}.csv"))
        image = dump_image(result.hit_buffer, str(tmp_path / f"run{i}.ppm"))
        outputs.append((read_bytes(csv), read_bytes(image), read_bytes(trace)))

    assert outputs[0] == outputs[1] == outputs[2]
    assert outputs[0][2]


# ----------------------------------------------------------------------------------------------
def test_ttp_is_perfectly_accurate_without_evictions(small_config):
    # L1 holds the whole tree: every prefetched stack entry is popped and read later
    config = apply_overrides(small_config, {'policy': 'ttp-dfs', 'l1.capacity': '1MB'})
    result, baseline = run_pair(config)

    assert result.ledger.l1.prefetched_blocks > 0
    assert accuracy(result.ledger, 'l1') == 1.0
    assert result.ledger.l1.unused_prefetch_evictions == 0
    assert result.ledger.dram_reads == baseline.ledger.dram_reads


def test_perfect_upward_mode(single_ray_config):
    config = apply_overrides(single_ray_config, {'policy': 'perfect-upward'})
    result, baseline = run_pair(config)
    ledger, base = result.ledger, baseline.ledger

    assert sum(ledger.popstreak_l1_miss[1:]) == 0
    assert ledger.cycles <= base.cycles
    assert sum(base.popstreak_l1_miss) == base.l1.misses > 0
    expected = sum(base.popstreak_l1_miss[1:]) / sum(base.popstreak_l1_miss)
    assert coverage(ledger, base, 'l1') == pytest.approx(expected, abs=1e-9)


def test_perfect_downward_mode(single_ray_config):
    config = apply_overrides(single_ray_config, {'policy': 'perfect-downward'})
    result, baseline = run_pair(config)

    assert result.ledger.popstreak_l1_miss[0] == 0
    assert result.ledger.cycles <= baseline.ledger.cycles


# ----------------------------------------------------------------------------------------------
@pytest.fixture
def deep_branch_config():
    """One ray at a time on a tree with long pop streaks and a small L1."""
    return apply_overrides(RTSIM.SimConfig(), {
        'scene': 'synthetic:deep-branch:2048:0',
        'width': 4, 'height': 4,
        'sm_count': 1,
        'rt.warp_size': 1,
        'rt.warp_buffer_size': 1,
        'bounce_depth': 0,
        'rt.max_stack_depth': 256,
        'l1.capacity': '4KB',
        'dram.latency': 200,
        'prefetch.queue_size': 128,
    })


def test_ttp_speedup_on_deep_branch_scene(deep_branch_config):
    config = apply_overrides(deep_branch_config, {'policy': 'ttp-dfs'})
    result, baseline = run_pair(config)

    assert baseline.ledger.cycles / result.ledger.cycles >= 1.10
    # the amount of data read stays nearly the same
    assert result.ledger.dram_reads == pytest.approx(baseline.ledger.dram_reads, rel=0.05)


def test_bfs_misses_decrease_with_distance(deep_branch_config):
    misses = []
    for distance in (1, 2, 4):
        config = apply_overrides(deep_branch_config, {
            'policy': 'ttp-bfs', 'rt.traversal_order': 'bfs', 'rt.max_stack_depth': 4096,
            'l1.capacity': '1MB', 'prefetch.bfs_distance': distance})
        misses.append(run_experiment(config).ledger.l1.misses)

    assert misses[0] >= misses[1] >= misses[2]


@pytest.mark.parametrize("kind, count", [("grid", 256), ("random-boxes", 256), ("deep-branch", 512)])
def test_bfs_visits_at_least_as_many_nodes_as_dfs(kind, count):
    triangles = generate_synthetic(kind, count, seed=1)
    bvh = build(triangles)
    rays = generate_primary_rays(default_camera(triangles, 8, 8))

    visits = {order: sum(trace_ray(ray, bvh, order=order, max_stack_depth=4096).visits for ray in rays)
              for order in TraversalOrder}
    assert visits[TraversalOrder.BFS] >= visits[TraversalOrder.DFS] > 0


def test_deep_branch_scene_has_long_pop_streaks():
    triangles = generate_synthetic("deep-branch", 64, seed=1)
    bvh = build(triangles)
    events = []
    for i, ray in enumerate(generate_primary_rays(default_camera(triangles, 64, 64))):
        events.extend(trace_ray(ray, bvh, thread_id=i).events)

    classes = [streak for streak in pop_streak_classes(events) if streak is not None]
    assert max(classes) >= 4
    assert pop_streak_histogram(events)["all"][3] == classes.count(4) > 0


# ----------------------------------------------------------------------------------------------
@pytest.mark.parametrize("overrides", [{}, {'policy': 'ttp-dfs', 'l1.capacity': '4KB'}, POLICY_MATRIX[5]])
def test_cache_identities_hold(small_config, overrides):
    core = RTSIM.Core(apply_overrides(small_config, overrides))
    ledger, _ = core.run()

    assert core.hierarchy.identity_report() == []
    assert ledger.identity_report() == []
    for level in (ledger.l1, ledger.l2):
        # stalled demands are retried, so they are not part of the outcome partition
        assert level.demand_outcomes[Category.HIT_MSHR_FULL] == 0
        assert level.demand_outcomes[Category.MISS_MSHR_FULL] == 0
        assert level.hits + level.misses == level.demand_accesses
    assert ledger.l1.forwarded == ledger.l2.accesses
    assert ledger.l2.forwarded == ledger.dram_reads
