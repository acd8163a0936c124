import os
import sys
sys.path.insert(0, os.path.realpath(os.path.join(os.path.dirname(__file__), '../../')))

import re

import numpy as np
import pandas as pd
import pytest

import RTSIM
from RTSIM.__main__ import main
from RTSIM.config import apply_overrides
from RTSIM.core import hit_buffer, HIT_DTYPE
from RTSIM.experiment import (run_pair, run_experiment, results_table, write_csv, run_sweep, parse_sweep,
                              sweep_overrides, geomean_speedup, dump_image, primitive_colors, SWEEP_COLUMNS)
from RTSIM.metrics import CSV_COLUMNS, EXTRA_COLUMNS
from RTSIM.intersect import MISS, make_hit
from RTSIM.scene import Triangle, Ray


def test_run_pair_shares_workload(small_config):
    config = apply_overrides(small_config, {'policy': 'ttp-dfs'})
    result, baseline = run_pair(config)

    assert result.ledger.policy == 'ttp-dfs'
    assert baseline.ledger.policy == 'off'
    assert np.array_equal(result.hit_buffer, baseline.hit_buffer)
    assert result.ledger.node_visits == baseline.ledger.node_visits
    assert result.ledger.identity_report() == []


def test_run_pair_without_policy(single_ray_config):
    result, baseline = run_pair(single_ray_config)
    assert result is baseline


def test_results_table_and_csv(tmp_path, small_config):
    config = apply_overrides(small_config, {'policy': 'park-leaf'})
    result, baseline = run_pair(config)
    table = results_table(result, baseline, run_id='park')

    assert list(table.columns) == list(CSV_COLUMNS + EXTRA_COLUMNS)
    assert table.loc[0, 'speedup_vs_baseline'] == pytest.approx(baseline.ledger.cycles / result.ledger.cycles)

    path = write_csv(table, str(tmp_path / "results.csv"))
    loaded = pd.read_csv(path)
    assert list(loaded.columns) == list(CSV_COLUMNS + EXTRA_COLUMNS)
    assert loaded.loc[0, 'run_id'] == 'park'
    assert loaded.loc[0, 'policy'] == 'park-leaf'
    assert loaded.loc[0, 'cycles'] == result.ledger.cycles


def test_results_table_without_baseline(single_ray_config):
    table = results_table(run_experiment(single_ray_config))
    assert pd.isna(table.loc[0, 'speedup_vs_baseline'])
    assert pd.isna(table.loc[0, 'l1_coverage'])


# ----------------------------------------------------------------------------------------------
def test_core_run(small_config, capsys):
    core = RTSIM.Core(small_config)
    ledger, buffer = core.run(verbose=2)

    assert buffer.shape == (4, 4)
    assert buffer.dtype == HIT_DTYPE
    assert ledger.rays >= 16
    assert len(ledger.batches) == (2 if buffer["hit"].any() else 1)
    assert ledger.identity_report() == []
    assert ledger.pops == ledger.node_visits
    output = capsys.readouterr().out
    assert "Batch primary: 16 rays" in output
    assert "METRIC" in output
    assert "L1: 32KB" in repr(core)

    with pytest.raises(RTSIM.SimulationError):
        core.run_batch([Ray((0.0, 0.0, 0.0), (1.0, 0.0, 0.0))])


def test_trace_lines(single_ray_config, tmp_path):
    core = RTSIM.Core(single_ray_config)
    core.run()
    lines = core.trace_lines()

    assert lines
    assert all(re.fullmatch(r"\d+ 0 (push|pop) 0x[0-9a-f]+", line) for line in lines)
    cycles = [int(line.split()[0]) for line in lines]
    assert cycles == sorted(cycles)

    path = core.save_trace(str(tmp_path / "trace.txt"))
    with open(path) as f:
        assert f.read().splitlines() == lines


def test_save_and_load_results(tmp_path, single_ray_config):
    core = RTSIM.Core(single_ray_config)
    core.run()
    path = core.save_results(name='first', root=str(tmp_path), timestamp=False, comment='single ray')
    assert os.path.basename(path) == 'first.pkl'

    results = RTSIM.load_results('first.pkl', str(tmp_path))
    assert results['comment'] == 'single ray'
    assert results['ledger'].cycles == core.ledger.cycles
    assert np.array_equal(results['hit_buffer'], core.hit_buffer)
    assert list(results['table'].columns) == list(CSV_COLUMNS + EXTRA_COLUMNS)

    core.save_results(name='second', root=str(tmp_path))
    table = RTSIM.load_results_multiple_files(str(tmp_path))
    assert len(table) == 2


def test_hit_buffer_packing():
    tri = Triangle((1.0, -1.0, -1.0), (1.0, 1.0, -1.0), (1.0, 0.0, 2.0), id=4)
    ray = Ray((0.0, 0.0, 0.0), (1.0, 0.0, 0.0))
    buffer = hit_buffer([make_hit(ray, tri, 1.0), MISS], 2, 1)

    assert buffer['hit'].tolist() == [[True, False]]
    assert buffer['primitive_id'].tolist() == [[4, -1]]
    assert np.isinf(buffer['t'][0, 1])


# ----------------------------------------------------------------------------------------------
def test_dump_image(tmp_path):
    buffer = np.zeros((1, 2), dtype=HIT_DTYPE)
    buffer[0, 0] = (True, 3, 1.0)
    buffer[0, 1] = (False, -1, np.inf)
    path = dump_image(buffer, str(tmp_path / "hits.ppm"))

    with open(path, 'rb') as f:
        data = f.read()
    header = b"P6\n2 1\n255\n"
    assert data.startswith(header)
    pixels = data[len(header):]
    assert len(pixels) == 6
    assert pixels[:3] == primitive_colors([3])[0].tobytes()
    assert pixels[3:] == b"\x00\x00\x00"


def test_primitive_colors():
    colors = primitive_colors(np.arange(1000))
    assert colors.shape == (1000, 3)
    assert not np.any(np.all(colors == 0, axis=-1))
    assert np.array_equal(colors, primitive_colors(np.arange(1000)))


def test_dump_image_unwritable(tmp_path):
    with pytest.raises(OSError):
        dump_image(np.zeros((1, 1), dtype=HIT_DTYPE), str(tmp_path / "missing" / "hits.ppm"))


# ----------------------------------------------------------------------------------------------
def test_parse_sweep():
    assert parse_sweep("bfs_distance=1, 2,4") == ('bfs_distance', ['1', '2', '4'])
    assert parse_sweep("intensity=1,2,16;1,4,32") == ('intensity', ['1,2,16', '1,4,32'])
    with pytest.raises(RTSIM.ConfigError):
        parse_sweep("bfs_distance")


def test_sweep_overrides():
    assert sweep_overrides('resolution', '8x4') == {'width': '8', 'height': '4'}
    assert sweep_overrides('resolution', 16) == {'width': '16', 'height': '16'}
    assert sweep_overrides('cache_size', '64KB') == {'l1.capacity': '64KB'}
    with pytest.raises(RTSIM.ConfigError, match="unknown sweep axis"):
        sweep_overrides('voltage', 1)


def test_sweep_bfs_distance_shares_baseline(small_config):
    base = apply_overrides(small_config, {'policy': 'ttp-bfs', 'rt.traversal_order': 'bfs',
                                          'rt.max_stack_depth': 1024})
    table = run_sweep(base, 'bfs_distance', [1, 2, 4])

    assert list(table.columns) == list(SWEEP_COLUMNS)
    assert list(table['run_id']) == ['baseline', 'bfs_distance-1', 'bfs_distance-2', 'bfs_distance-4']
    assert list(table['status']) == ['ok'] * 4
    assert table.loc[0, 'policy'] == 'off'
    assert (table['speedup_vs_baseline'][1:] > 0).all()
    # identical workload for every point
    assert table['avg_nodes_per_ray'].nunique() == 1


def test_sweep_cache_size_has_baseline_per_point(single_ray_config):
    base = apply_overrides(single_ray_config, {'policy': 'ttp-dfs'})
    table = run_sweep(base, 'cache_size', ['8KB', '16KB'])

    assert list(table['run_id']) == ['baseline-8KB', 'baseline-16KB', 'cache_size-8KB', 'cache_size-16KB']
    assert list(table['value']) == ['8KB', '16KB', '8KB', '16KB']


def test_sweep_arbitration(single_ray_config):
    base = apply_overrides(single_ray_config, {'policy': 'ttp-dfs'})
    table = run_sweep(base, 'arbitration', ['demand-priority', 25, 50, 100])
    assert len(table) == 5
    assert list(table['status']) == ['ok'] * 5


def test_sweep_records_failed_point(single_ray_config, monkeypatch):
    real_run = RTSIM.experiment.run_experiment

    def run(config, **kwargs):
        if config.prefetch.arbitration == 50:
            raise RTSIM.BvhError("child address outside the image")
        return real_run(config, **kwargs)

    monkeypatch.setattr(RTSIM.experiment, "run_experiment", run)
    base = apply_overrides(single_ray_config, {'policy': 'ttp-dfs'})
    table = run_sweep(base, 'arbitration', [25, 50])

    assert list(table['run_id']) == ['baseline', 'arbitration-25', 'arbitration-50']
    assert list(table['status']) == ['ok', 'ok', 'failed']
    assert table.loc[1, 'speedup_vs_baseline'] > 0
    assert pd.isna(table.loc[2, 'cycles'])


@pytest.mark.parametrize("axis, values", [
    ('bfs_distance', []),
    ('bfs_distance', [2, 2]),
    ('voltage', [1]),
])
def test_sweep_errors(single_ray_config, axis, values):
    with pytest.raises(RTSIM.ConfigError):
        run_sweep(single_ray_config, axis, values)


def test_geomean_speedup():
    table = pd.DataFrame({
        'run_id': ['baseline', 'a', 'b', 'c'],
        'speedup_vs_baseline': [1.0, 2.0, 8.0, None],
        'status': ['ok', 'ok', 'ok', 'failed'],
    })
    assert geomean_speedup(table) == pytest.approx(4.0)
    assert geomean_speedup(table.iloc[:1]) is None


# ----------------------------------------------------------------------------------------------
@pytest.fixture
def cli_config(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("scene = synthetic:random-boxes:64:1\n"
                    "width = 4\nheight = 4\nsm_count = 1\nrt.warp_size = 4\nbounce_depth = 0\n")
    return str(path)


def test_cli_single_run(tmp_path, cli_config):
    out = str(tmp_path / "results.csv")
    image = str(tmp_path / "hits.ppm")
    trace = str(tmp_path / "trace.txt")
    status = main(["--config", cli_config, "--policy", "ttp-dfs", "--out", out, "--image", image,
                   "--trace", trace, "-v", "0"])

    assert status == 0
    table = pd.read_csv(out)
    assert len(table) == 1
    assert table.loc[0, 'policy'] == 'ttp-dfs'
    assert table.loc[0, 'speedup_vs_baseline'] > 0
    with open(image, 'rb') as f:
        assert f.read().startswith(b"P6\n4 4\n255\n")
    with open(trace) as f:
        assert f.readline().split()[2] == 'push'


def test_cli_prints_csv(cli_config, capsys):
    assert main(["--config", cli_config, "-v", "0"]) == 0
    assert capsys.readouterr().out.startswith("run_id,policy,cycles,speedup_vs_baseline")


def test_cli_sweep(tmp_path, cli_config):
    out = str(tmp_path / "sweep.csv")
    status = main(["--config", cli_config, "--policy", "ttp-dfs", "--sweep", "intensity=1,2,16;1,4,32",
                   "--out", out, "-v", "0"])
    assert status == 0
    table = pd.read_csv(out)
    assert list(table['run_id']) == ['baseline', 'intensity-1,2,16', 'intensity-1,4,32']


def test_cli_sweep_rejects_single_run_outputs(tmp_path, cli_config, capsys):
    image = str(tmp_path / "hits.ppm")
    status = main(["--config", cli_config, "--sweep", "intensity=1,2,16", "--image", image, "-v", "0"])

    assert status == 1
    assert "--sweep" in capsys.readouterr().err
    assert not os.path.exists(image)


def test_cli_bad_config(tmp_path, capsys):
    path = tmp_path / "bad.cfg"
    path.write_text("l3.capacity = 1MB\n")
    assert main(["--config", str(path), "-v", "0"]) == 1
    assert "unknown key" in capsys.readouterr().err


def test_cli_unknown_policy(cli_config, capsys):
    assert main(["--config", cli_config, "--policy", "warp-speed", "-v", "0"]) == 1
    assert "unknown policy" in capsys.readouterr().err
