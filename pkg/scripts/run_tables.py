"""Run the table configs and write their CSV artifacts.

    python3 scripts/run_tables.py                   # all configs in configs/
    python3 scripts/run_tables.py configs/table2_zero_sum.json --parallelism 4
    python3 scripts/run_tables.py --large           # full table sizes (slow: minutes to hours)

Artifacts go to each config's output_dir (relative to the working directory)
unless --output-root is given.
"""
import argparse
import glob
import os
import sys
from dataclasses import replace

from stochvi.bench import check_expectations, emit_table, load_config, run_experiment

# full table sizes, used with --large
LARGE_DIMS = {
    "fractional": [(200,), (500,), (1000,), (2000,)],
    "zero_sum": [(100, 100), (250, 250), (500, 500), (1000, 1000)],
    "symmetric": [(100, 100), (250, 250), (500, 500), (1000, 1000)],
    "asymmetric": [(100, 200), (300, 600), (500, 1000), (1000, 2000)],
}


def main(argv=None):
    here = os.path.dirname(os.path.abspath(__file__))
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("configs", nargs="*")
    ap.add_argument("--parallelism", type=int, default=1)
    ap.add_argument("--output-root", default=None)
    ap.add_argument("--large", action="store_true", help="use the full table sizes")
    args = ap.parse_args(argv)
    paths = args.configs or sorted(glob.glob(os.path.join(here, "..", "configs", "*.json")))
    failed = False
    for path in paths:
        cfg = load_config(path)
        name = os.path.splitext(os.path.basename(path))[0]
        if args.large:
            cfg = replace(cfg, dims=tuple(LARGE_DIMS[cfg.family]), expect=(), output_dir=None)
            name += "_large"
        out = os.path.join(args.output_root, name) if args.output_root else (cfg.output_dir or os.path.join("results", name))
        summary = run_experiment(cfg, parallelism=args.parallelism, output_dir=out)
        print(f"== {name} ({out})")
        print(emit_table(summary, "aligned_text"))
        for r in check_expectations(summary, cfg.expect):
            print(r.line())
            failed |= not r.passed
        print()
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
