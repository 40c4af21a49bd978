"""Seeded benchmark harness: replicated runs, aggregation, CSV and text tables."""
from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidInputError, UnsupportedOperationError
from .problems import (
    GAME_KINDS,
    affine_test_problem,
    generate_fractional,
    generate_game,
    initial_point,
    problem_record,
)
from .schedules import ConstantStep, batch_from_record, paper_fractional_step, paper_game_step
from .solvers import ALGORITHMS, RunReport, SolverConfig, StoppingRule, run

__all__ = [
    "FAMILIES",
    "SUMMARY_COLUMNS",
    "ConfigError",
    "ExperimentConfig",
    "RunRecord",
    "SummaryRow",
    "BenchmarkSummary",
    "load_config",
    "config_from_dict",
    "derive_seed",
    "run_experiment",
    "summarize",
    "emit_table",
    "parse_summary_csv",
    "emit_trajectory_curves",
    "runs_csv",
    "check_expectations",
]

FAMILIES = ("fractional",) + GAME_KINDS + ("affine",)
SUMMARY_COLUMNS = ("family", "dim", "algorithm", "mean_iterations", "sd_iterations", "mean_time_s",
                   "sd_time_s", "mean_oracle_calls", "convergence_rate")
RUN_COLUMNS = ("family", "dim", "algorithm", "replication", "problem_seed", "solver_seed", "iterations",
               "converged", "diverged", "final_residual", "oracle_calls", "expected_oracle_calls")
_FAMILY_CODE = {f: i for i, f in enumerate(FAMILIES)}
_ALG_CODE = {"SFBF": 1, "SEG": 2}


class ConfigError(InvalidInputError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    """One benchmark experiment.

    ``dims`` holds ``(d,)`` tuples for fractional/affine problems and
    ``(n_I, n_II)`` tuples for games. ``step_rule`` is one of
    ``"paper"`` (family default), ``"paper_game_rule"``,
    ``"paper_fractional_rule"`` or ``{"alpha": a, "override": bool}``.
    ``batch_rule`` is a batch-schedule record; the experiment rule's ``d``
    defaults to the problem dimension.
    """

    family: str
    dims: tuple
    algorithms: tuple = ALGORITHMS
    replications: int = 10
    base_seed: int = 0
    stop: StoppingRule = StoppingRule(residual_tol=1e-3, max_iterations=5000)
    step_rule: object = "paper"
    batch_rule: dict = field(default_factory=lambda: {"kind": "experiment", "rounding": "round"})
    noise_sd: float = 0.1
    # "loss" negates the Uniform(0,1) payoff draws; it is the orientation
    # under which both methods converge from random starts on every game kind
    game_orientation: str = "loss"
    record_trajectory: bool = False
    output_dir: Optional[str] = None
    parallelism: int = 1
    # assertions checked by `stochvi bench`, see check_expectations
    expect: tuple = ()

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"family must be one of {FAMILIES}")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if not self.dims:
            raise ConfigError("dims must be nonempty")
        dims = tuple(tuple(int(v) for v in (d if isinstance(d, (list, tuple)) else (d,))) for d in self.dims)
        for d in dims:
            if any(v < 1 for v in d):
                raise ConfigError(f"invalid dimension {d}")
            if self.family in GAME_KINDS:
                if len(d) != 2:
                    raise ConfigError("game dims are (n_I, n_II) pairs")
                if self.family in ("zero_sum", "symmetric") and d[0] != d[1]:
                    raise ConfigError(f"{self.family} games need n_I == n_II, got {d}")
            elif len(d) != 1:
                raise ConfigError(f"{self.family} dims are single integers")
        object.__setattr__(self, "dims", dims)
        algs = tuple(a.upper() for a in self.algorithms)
        if not algs or any(a not in ALGORITHMS for a in algs):
            raise ConfigError(f"algorithms must be a nonempty subset of {ALGORITHMS}")
        object.__setattr__(self, "algorithms", algs)
        if self.game_orientation not in ("payoff", "loss"):
            raise ConfigError("game_orientation must be 'payoff' or 'loss'")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")
        try:
            batch_from_record(self.batch_rule, 1)
        except (InvalidInputError, KeyError, TypeError) as exc:
            raise ConfigError(f"bad batch_rule: {exc}") from exc
        rule = self.step_rule
        if isinstance(rule, dict):
            if not isinstance(rule.get("alpha"), (int, float)) or rule["alpha"] <= 0:
                raise ConfigError("explicit step_rule needs a positive 'alpha'")
        elif rule not in ("paper", "paper_game_rule", "paper_fractional_rule"):
            raise ConfigError(f"unknown step_rule {rule!r}")


def config_from_dict(raw: dict) -> ExperimentConfig:
    raw = dict(raw)
    try:
        if "stop" in raw:
            raw["stop"] = StoppingRule(**raw["stop"])
        for key in ("dims", "algorithms", "expect"):
            if key in raw:
                raw[key] = tuple(raw[key])
        return ExperimentConfig(**raw)
    except ConfigError:
        raise
    except (TypeError, InvalidInputError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(raw)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    out = asdict(cfg)
    out["dims"] = [list(d) for d in cfg.dims]
    out["algorithms"] = list(cfg.algorithms)
    out["expect"] = list(cfg.expect)
    return out


def derive_seed(base_seed: int, *keys: int) -> int:
    """64-bit seed from a base seed and integer keys (hash mixing via SeedSequence)."""
    words = np.random.SeedSequence([int(base_seed) & (2**64 - 1), *[int(k) for k in keys]]).generate_state(2)
    return int(words[0]) << 32 | int(words[1])


def dim_label(dim: tuple) -> str:
    return "x".join(str(v) for v in dim)


def _parse_dim(label: str) -> tuple:
    return tuple(int(v) for v in str(label).split("x"))


@dataclass
class RunRecord:
    family: str
    dim: str
    algorithm: str
    replication: int
    problem_seed: int
    solver_seed: int
    problem: dict
    report: RunReport

    @property
    def run_id(self):
        return f"{self.family}-{self.dim}-{self.algorithm}-{self.replication}"

    @property
    def expected_oracle_calls(self):
        return 2 * sum(self.report.batch_sizes)


def make_problem(family, dim, seed, noise_sd=0.1, orientation="loss"):
    if family == "fractional":
        return generate_fractional(dim[0], seed, noise_sd)
    if family in GAME_KINDS:
        return generate_game(dim[0], dim[1], family, seed, noise_sd, orientation)
    if family == "affine":
        return affine_test_problem(dim[0], True, seed, noise_sd)
    raise ConfigError(f"unknown family {family!r}")


def solver_config(cfg: ExperimentConfig, problem, algorithm: str, seed: int) -> SolverConfig:
    rule = cfg.step_rule
    if rule == "paper":
        rule = "paper_fractional_rule" if cfg.family == "fractional" else "paper_game_rule"
    override = False
    if rule == "paper_fractional_rule":
        step = paper_fractional_step(problem.dim, algorithm)
        override = True  # no certified Lipschitz modulus for fractional programs
    elif rule == "paper_game_rule":
        step = paper_game_step(problem.lipschitz_L, algorithm)
    else:
        step = ConstantStep(float(rule["alpha"]))
        override = bool(rule.get("override", False))
    batch = batch_from_record(cfg.batch_rule, problem.dim)
    return SolverConfig(algorithm, step, batch, cfg.stop, seed, cfg.record_trajectory, override)


def _run_task(task):
    cfg, dim, algorithm, r = task
    fam = _FAMILY_CODE[cfg.family]
    pseed = derive_seed(cfg.base_seed, fam, *dim, r)
    sseed = derive_seed(cfg.base_seed, fam, *dim, r, _ALG_CODE[algorithm])
    problem = make_problem(cfg.family, dim, pseed, cfg.noise_sd, cfg.game_orientation)
    x0 = initial_point(problem)
    report = run(problem, solver_config(cfg, problem, algorithm, sseed), x0)
    return RunRecord(cfg.family, dim_label(dim), algorithm, r, pseed, sseed, problem_record(problem), report)


def _tasks(cfg):
    return [(cfg, dim, alg, r) for dim in cfg.dims for alg in cfg.algorithms for r in range(cfg.replications)]


@dataclass(frozen=True)
class SummaryRow:
    family: str
    dim: str
    algorithm: str
    mean_iterations: float
    sd_iterations: float
    mean_time_s: float
    sd_time_s: float
    mean_oracle_calls: float
    convergence_rate: float


@dataclass
class BenchmarkSummary:
    rows: list
    records: list = field(default_factory=list)

    def row(self, dim, algorithm):
        label = dim if isinstance(dim, str) else dim_label(tuple(dim) if isinstance(dim, (list, tuple)) else (dim,))
        for r in self.rows:
            if r.dim == label and r.algorithm == algorithm:
                return r
        raise KeyError((label, algorithm))

    def ratio(self, dim, numerator="SEG", denominator="SFBF"):
        """``(iterations ratio, time ratio)`` of two algorithms at one dimension."""
        a, b = self.row(dim, numerator), self.row(dim, denominator)
        return a.mean_iterations / b.mean_iterations, a.mean_time_s / b.mean_time_s

    def records_for(self, dim, algorithm):
        label = self.row(dim, algorithm).dim
        return [r for r in self.records if r.dim == label and r.algorithm == algorithm]


def _sd(v):
    return float(np.std(v, ddof=1)) if len(v) > 1 else 0.0


def summarize(records) -> BenchmarkSummary:
    groups = {}
    for rec in records:
        groups.setdefault((rec.family, rec.dim, rec.algorithm), []).append(rec)
    rows = []
    for (fam, dim, alg), recs in groups.items():
        its = [r.report.iterations for r in recs]
        ts = [r.report.wall_time for r in recs]
        calls = [r.report.oracle_calls for r in recs]
        rows.append(SummaryRow(fam, dim, alg, float(np.mean(its)), _sd(its), float(np.mean(ts)), _sd(ts),
                               float(np.mean(calls)), sum(r.report.converged for r in recs) / len(recs)))
    return BenchmarkSummary(rows, list(records))


def run_experiment(cfg: ExperimentConfig, parallelism: Optional[int] = None, output_dir: Optional[str] = None) -> BenchmarkSummary:
    """Run every (dim, algorithm, replication) triple and aggregate.

    Problem seeds depend on (family, dim, replication) only, so SFBF and
    SEG see the same instances and starting points. Output order, and
    therefore every non-timing artifact, is independent of ``parallelism``.
    """
    workers = parallelism or cfg.parallelism
    tasks = _tasks(cfg)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_task, tasks))
    else:
        records = [_run_task(t) for t in tasks]
    summary = summarize(records)
    out = output_dir or cfg.output_dir
    if out:
        write_artifacts(cfg, summary, out)
    return summary


def runs_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RUN_COLUMNS)
    for r in records:
        rep = r.report
        w.writerow([r.family, r.dim, r.algorithm, r.replication, r.problem_seed, r.solver_seed, rep.iterations,
                    int(rep.converged), int(rep.diverged), repr(rep.final_residual), rep.oracle_calls,
                    r.expected_oracle_calls])
    return buf.getvalue()


def _timings_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("run_id", "wall_time_s"))
    for r in records:
        w.writerow([r.run_id, f"{r.report.wall_time:.6f}"])
    return buf.getvalue()


def write_artifacts(cfg, summary, out):
    os.makedirs(out, exist_ok=True)
    files = {
        "runs.csv": runs_csv(summary.records),
        "timings.csv": _timings_csv(summary.records),
        "summary.csv": emit_table(summary, "csv"),
        "summary.txt": emit_table(summary, "aligned_text"),
        "config.json": json.dumps(config_to_dict(cfg), indent=2, default=str) + "\n",
        "problems.jsonl": "".join(json.dumps({"run_id": r.run_id, **r.problem}) + "\n" for r in summary.records),
    }
    if cfg.record_trajectory:
        files["trajectories.csv"] = emit_trajectory_curves(summary.records)
    for name, text in files.items():
        with open(os.path.join(out, name), "w", newline="") as fh:
            fh.write(text)


def _g6(v):
    return f"{v:.6g}"


def emit_table(summary: BenchmarkSummary, style: str = "csv") -> str:
    """Render a summary as CSV (fixed :data:`SUMMARY_COLUMNS`) or as an
    aligned text table with one line per dimension and SFBF/SEG side by side."""
    if not summary.rows:
        raise InvalidInputError("summary is empty")
    if style == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for r in summary.rows:
            w.writerow([r.family, r.dim, r.algorithm] + [_g6(getattr(r, c)) for c in SUMMARY_COLUMNS[3:]])
        return buf.getvalue()
    if style != "aligned_text":
        raise InvalidInputError(f"unknown style {style!r}")
    algs = [a for a in ALGORITHMS if any(r.algorithm == a for r in summary.rows)]
    header = ["family", "dim"]
    for a in algs:
        header += [f"{a} iters", f"{a} time(s)", f"{a} conv"]
    if len(algs) == 2:
        header.append("SEG/SFBF iters")
    lines = []
    keys = list(dict.fromkeys((r.family, r.dim) for r in summary.rows))
    for fam, dim in keys:
        cells = [fam, dim]
        by_alg = {r.algorithm: r for r in summary.rows if r.family == fam and r.dim == dim}
        for a in algs:
            r = by_alg.get(a)
            cells += ["-", "-", "-"] if r is None else [f"{r.mean_iterations:.2f}", f"{r.mean_time_s:.4f}",
                                                         f"{r.convergence_rate:.2f}"]
        if len(algs) == 2:
            cells.append(f"{by_alg['SEG'].mean_iterations / by_alg['SFBF'].mean_iterations:.2f}"
                         if len(by_alg) == 2 else "-")
        lines.append(cells)
    widths = [max(len(header[i]), *(len(row[i]) for row in lines)) for i in range(len(header))]
    fmt = lambda row: " | ".join(c.rjust(w) for c, w in zip(row, widths))
    rule = "-+-".join("-" * w for w in widths)
    return "\n".join([fmt(header), rule] + [fmt(r) for r in lines]) + "\n"


def parse_summary_csv(text: str) -> list:
    rows = []
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != SUMMARY_COLUMNS:
        raise InvalidInputError(f"unexpected summary columns {reader.fieldnames}")
    for rec in reader:
        rows.append(SummaryRow(rec["family"], rec["dim"], rec["algorithm"],
                               *(float(rec[c]) for c in SUMMARY_COLUMNS[3:])))
    return rows


def emit_trajectory_curves(reports) -> str:
    """Long-format CSV ``run_id, algorithm, n, wall_time_s, residual``.

    Accepts :class:`RunRecord` objects or ``(run_id, RunReport)`` pairs.
    """
    items = []
    for k, item in enumerate(reports):
        if isinstance(item, RunRecord):
            items.append((item.run_id, item.report))
        elif isinstance(item, RunReport):
            items.append((f"run{k}", item))
        else:
            items.append((str(item[0]), item[1]))
    missing = [rid for rid, rep in items if rep.trajectory is None]
    if missing:
        raise UnsupportedOperationError(f"runs without a recorded trajectory: {', '.join(missing)}")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("run_id", "algorithm", "n", "wall_time_s", "residual"))
    for rid, rep in items:
        for p in rep.trajectory:
            w.writerow([rid, rep.algorithm, p.n, f"{p.wall_time:.6f}", repr(p.residual)])
    return buf.getvalue()


def check_expectations(summary: BenchmarkSummary, expect) -> list:
    """Evaluate ``expect`` entries against a summary.

    Each entry is a dict with ``dim`` and either ``algorithm`` + ``metric``
    (a :class:`SummaryRow` field) or ``ratio: [numerator, denominator]``
    (mean-iteration ratio), plus optional ``min``/``max`` bounds. The
    metric ``"max_final_residual"`` is the largest final residual over the
    group's runs.
    """
    from .checks import CheckResult

    results = []
    for e in expect:
        lo, hi = e.get("min", -math.inf), e.get("max", math.inf)
        dim = str(e["dim"])
        if "ratio" in e:
            num, den = e["ratio"]
            value = summary.ratio(dim, num, den)[0]
            name = f"{dim} {num}/{den} iterations"
        else:
            alg, metric = e["algorithm"], e["metric"]
            if metric == "max_final_residual":
                value = max(r.report.final_residual for r in summary.records_for(dim, alg))
            else:
                value = getattr(summary.row(dim, alg), metric)
            name = f"{dim} {alg} {metric}"
        results.append(CheckResult(name, bool(lo <= value <= hi), f"{value:.4g} in [{lo:g}, {hi:g}]"))
    return results
