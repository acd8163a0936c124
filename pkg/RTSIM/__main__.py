'''
The code inside `__main__.py` runs when this module is run from the command line with:

    python -m RTSIM --config sim.cfg --policy ttp-dfs --out results.csv
'''
import sys
import argparse
import logging

from .utils import ConfigError, ObjParseError, BvhError, SimulationError
from .config import SimConfig, parse_config, apply_overrides
from .experiment import run_pair, results_table, run_sweep, parse_sweep, write_csv, geomean_speedup, dump_image


def build_parser():
    parser = argparse.ArgumentParser(prog="RTSIM", description="Cycle-level RT unit and tree traversal prefetcher simulator.")
    parser.add_argument("--config", help="configuration file of 'key = value' lines")
    parser.add_argument("--scene", help="OBJ path or synthetic:<kind>:<count>:<seed>")
    parser.add_argument("--policy", help="prefetch policy (off, ttp-dfs, ttp-bfs, park-leaf, perfect-upward, perfect-downward)")
    parser.add_argument("--sweep", help="<axis>=<v1,v2,...> with axis intensity, bfs_distance, arbitration, cache_size or resolution")
    parser.add_argument("--out", help="CSV output file (printed to the console when omitted)")
    parser.add_argument("--image", help="binary PPM of the primary hit buffer")
    parser.add_argument("--trace", help="stack event trace file")
    parser.add_argument("--seed", type=int, help="seed of the bounce rays")
    parser.add_argument("--processes", type=int, default=None, help="worker processes of a sweep")
    parser.add_argument("-v", "--verbose", type=int, default=1, choices=(0, 1, 2))
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        config = parse_config(args.config) if args.config else SimConfig().validate()
        overrides = {}
        if args.scene is not None:
            overrides['scene'] = args.scene
        if args.policy is not None:
            overrides['policy'] = args.policy
        if args.seed is not None:
            overrides['seed'] = args.seed
        config = apply_overrides(config, overrides)

        if args.sweep and (args.image or args.trace):
            raise ConfigError("--image and --trace apply to single runs and cannot be combined with --sweep.")
        if args.sweep:
            axis, values = parse_sweep(args.sweep)
            table = run_sweep(config, axis, values, processes=args.processes)
            speedup = geomean_speedup(table)
            if args.verbose and speedup is not None:
                print(f"Geometric mean speedup: {speedup:.4f}")
        else:
            result, baseline = run_pair(config, verbose=args.verbose, trace_path=args.trace)
            table = results_table(result, baseline, run_id=config.prefetch.policy.value)
            if args.image:
                dump_image(result.hit_buffer, args.image)
    except (ConfigError, ObjParseError, BvhError, SimulationError, OSError) as e:
        print(f"RTSIM: {e}", file=sys.stderr)
        return 1

    if args.out:
        write_csv(table, args.out)
    else:
        print(table.to_csv(index=False, float_format='%.10g'), end='')
    return 0


if __name__ == "__main__":
    sys.exit(main())
