"""Command-line entry point: ``stochvi bench | solve | check``."""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

import numpy as np

from . import bench
from .checks import SUITES
from .errors import InvalidInputError
from .problems import initial_point, problem_record
from .solvers import StoppingRule, run, trajectory_csv

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2


def _dim(text):
    try:
        return tuple(int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad dimension {text!r}; use 200 or 100x100")


def build_parser():
    p = argparse.ArgumentParser(prog="stochvi", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bench", help="run a benchmark experiment from a JSON config")
    b.add_argument("config")
    b.add_argument("--parallelism", type=int, default=None)
    b.add_argument("--output-dir", default=None)
    b.add_argument("--seed", type=int, default=None, help="override base_seed")

    s = sub.add_parser("solve", help="solve one generated problem and print the run report")
    s.add_argument("--family", required=True, choices=bench.FAMILIES)
    s.add_argument("--dim", required=True, type=_dim, help="d, or n_I x n_II for games (e.g. 100x100)")
    s.add_argument("--algorithm", default="SFBF", choices=("SFBF", "SEG"))
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--tol", type=float, default=1e-3)
    s.add_argument("--max-iter", type=int, default=5000)
    s.add_argument("--noise-sd", type=float, default=0.1)
    s.add_argument("--orientation", default="loss", choices=("payoff", "loss"))
    s.add_argument("--rounding", default="round", choices=("round", "ceil"))
    s.add_argument("--trajectory", default=None, help="write the trajectory CSV here")

    c = sub.add_parser("check", help="run the property suites")
    c.add_argument("--suite", action="append", choices=sorted(SUITES), help="repeatable; default all")
    return p


def _bench(args):
    try:
        cfg = bench.load_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, base_seed=args.seed)
    except bench.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    summary = bench.run_experiment(cfg, parallelism=args.parallelism, output_dir=args.output_dir)
    print(bench.emit_table(summary, "aligned_text"), end="")
    results = bench.check_expectations(summary, cfg.expect)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILED


def _solve(args):
    try:
        cfg = bench.ExperimentConfig(
            args.family, (args.dim,), (args.algorithm,), 1, args.seed,
            StoppingRule(args.tol, max_iterations=args.max_iter),
            batch_rule={"kind": "experiment", "rounding": args.rounding},
            noise_sd=args.noise_sd, game_orientation=args.orientation,
            record_trajectory=args.trajectory is not None,
        )
    except InvalidInputError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    problem = bench.make_problem(args.family, cfg.dims[0], args.seed, args.noise_sd, args.orientation)
    report = run(problem, bench.solver_config(cfg, problem, args.algorithm, args.seed), initial_point(problem))
    out = {
        "problem": problem_record(problem),
        "algorithm": report.algorithm,
        "iterations": report.iterations,
        "converged": report.converged,
        "diverged": report.diverged,
        "final_residual": report.final_residual,
        "oracle_calls": report.oracle_calls,
        "wall_time_s": round(report.wall_time, 6),
        "lipschitz_L": problem.lipschitz_L,
        "final_x_norm": float(np.linalg.norm(report.final_x)),
    }
    if report.message:
        out["message"] = report.message
    print(json.dumps(out, indent=2))
    if args.trajectory:
        trajectory_csv(report, args.trajectory)
    return EXIT_OK


def _check(args):
    failed = False
    for name in args.suite or list(SUITES):
        for r in SUITES[name]():
            print(r.line())
            failed |= not r.passed
    return EXIT_FAILED if failed else EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    return {"bench": _bench, "solve": _solve, "check": _check}[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
