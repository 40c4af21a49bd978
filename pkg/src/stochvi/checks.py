"""Property suites behind ``stochvi check``.

Each suite returns a list of :class:`CheckResult`; nothing here raises on
a failed property.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import StepSizeError
from .numkit import RngStream
from .oracle import MiniBatchEstimator
from .problems import affine_problem, affine_test_problem, generate_fractional, generate_game, initial_point
from .schedules import (
    ConstantBatch,
    ConstantStep,
    ExperimentRule,
    summability_report,
    validate_step_size,
)
from .sets import Box, NonnegativeOrthant, WholeSpace
from .solvers import SolverConfig, SolverState, StoppingRule, deterministic_fejer_check, run, sfbf_step

__all__ = ["CheckResult", "projection_suite", "oracle_suite", "dynamics_suite", "validation_suite", "SUITES"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def _sets(d, g):
    lo = g.normal(0.0, 1.0, d)
    return {
        "box": Box(lo, lo + g.uniform(0.1, 3.0, d)),
        "half_open_box": Box(np.zeros(d), np.full(d, np.inf)),
        "orthant": NonnegativeOrthant(d),
        "whole": WholeSpace(d),
    }


def projection_suite(n_cases: int = 1000, n_feasible: int = 100, d: int = 5, seed: int = 0):
    """Idempotence, nonexpansiveness, variational inequality and Pythagorean bound."""
    g = RngStream(seed).generator
    out = []
    for name, s in _sets(d, g).items():
        X = 3.0 * g.standard_normal((n_cases, d))
        Z = 3.0 * g.standard_normal((n_cases, d))
        P = np.array([s.project(x) for x in X])
        PZ = np.array([s.project(z) for z in Z])
        idem = sum(not np.array_equal(s.project(p), p) for p in P)
        nonexp = int(np.sum(np.linalg.norm(P - PZ, axis=1) > np.linalg.norm(X - Z, axis=1) + 1e-12))
        var_fail = pyth_fail = 0
        worst = -math.inf
        for x, p in zip(X, P):
            Y = np.array([s.project(y) for y in 3.0 * g.standard_normal((n_feasible, d))])
            ip = (Y - p) @ (x - p)
            worst = max(worst, float(ip.max()))
            var_fail += int(np.sum(ip > 1e-10))
            lhs = np.sum((p - Y) ** 2, axis=1) + np.sum((p - x) ** 2)
            pyth_fail += int(np.sum(lhs > np.sum((x - Y) ** 2, axis=1) + 1e-10))
        out += [
            CheckResult(f"projection/{name}/idempotence", idem == 0, f"{idem} failures in {n_cases}"),
            CheckResult(f"projection/{name}/nonexpansive", nonexp == 0, f"{nonexp} failures in {n_cases}"),
            CheckResult(f"projection/{name}/variational", var_fail == 0,
                        f"{var_fail} failures in {n_cases * n_feasible}, max <x-Px, y-Px> = {worst:.2e}"),
            CheckResult(f"projection/{name}/pythagorean", pyth_fail == 0,
                        f"{pyth_fail} failures in {n_cases * n_feasible}"),
        ]
    return out


def _oracle_families(seed):
    return {
        "fractional": generate_fractional(4, seed),
        "zero_sum": generate_game(3, 3, "zero_sum", seed),
        "symmetric": generate_game(3, 3, "symmetric", seed),
        "asymmetric": generate_game(2, 3, "asymmetric", seed),
        "affine": affine_test_problem(4, True, seed, noise_sd=0.5),
    }


def oracle_suite(n_samples: int = 100_000, seed: int = 0):
    """Unbiasedness per family, MSE x m constancy, and call accounting."""
    out = []
    root = RngStream(seed)
    for k, (name, prob) in enumerate(_oracle_families(seed).items()):
        g = root.child(1, k)
        x = initial_point(prob, seed)
        samples = np.array([prob.oracle.sampler(x, g) for _ in range(n_samples)])
        mean = samples.mean(axis=0)
        se = samples.std(axis=0, ddof=1) / math.sqrt(n_samples)
        t = prob.mean(x)
        z = float(np.max(np.abs(mean - t) / np.where(se > 0, se, 1.0)))
        out.append(CheckResult(f"oracle/{name}/unbiased", z <= 5.0, f"max |mean - T(x)| = {z:.2f} standard errors"))

    prob = affine_test_problem(3, True, seed, noise_sd=1.0)
    est = MiniBatchEstimator(prob.oracle)
    x = initial_point(prob, seed)
    scaled = [est.empirical_mse(x, m, 4000, root.child(2, m)) * m for m in (1, 4, 16, 64)]
    spread = (max(scaled) - min(scaled)) / float(np.mean(scaled))
    out.append(CheckResult("oracle/mse_times_m_constant", spread <= 0.25,
                           f"m*MSE = {[round(v, 3) for v in scaled]}, relative spread {spread:.3f}"))

    ok = True
    details = []
    for alg in ("SFBF", "SEG"):
        for prob in (generate_game(5, 5, "asymmetric", seed), affine_test_problem(6, True, seed, noise_sd=0.1)):
            cfg = SolverConfig(alg, ConstantStep(0.3 / prob.lipschitz_L), ExperimentRule(4),
                               StoppingRule(1e-3, max_iterations=60), seed=seed)
            rep = run(prob, cfg, initial_point(prob, seed))
            expected = 2 * sum(rep.batch_sizes)
            ok &= rep.oracle_calls == expected and len(rep.batch_sizes) == rep.iterations
            details.append(f"{alg}/{prob.family}: {rep.oracle_calls}=={expected}")
    out.append(CheckResult("oracle/call_accounting", ok, "; ".join(details)))
    return out


def dynamics_suite(seed: int = 0):
    """Noiseless SFBF: strongly monotone convergence, Fejer inequality, hand trace."""
    out = []
    one_d = affine_problem([[1.0]], [1.0], Box([0.0], [np.inf]))
    est = MiniBatchEstimator(one_d.oracle)
    s = sfbf_step(SolverState(0, np.array([0.0])), one_d, est, 0.5, 1, RngStream(seed))
    out.append(CheckResult("dynamics/hand_trace", s.y[0] == 0.5 and s.x[0] == 0.25,
                           f"Y={s.y[0]!r}, X1={s.x[0]!r} (expected 0.5, 0.25)"))

    fejer_ok = True
    for d in (2, 10, 30, 50):
        prob = affine_test_problem(d, True, seed + d)
        cfg = SolverConfig("SFBF", ConstantStep(0.5 / (math.sqrt(2) * prob.lipschitz_L)), ConstantBatch(1),
                           StoppingRule(1e-8, max_iterations=10_000), record_trajectory=True)
        rep = run(prob, cfg, initial_point(prob, seed))
        out.append(CheckResult(f"dynamics/strongly_monotone_d{d}", rep.converged,
                               f"residual {rep.final_residual:.2e} after {rep.iterations} iterations"))
        fejer_ok &= deterministic_fejer_check(prob, rep)

    runs = [
        (one_d, 0.5, np.array([0.0]), 50),
        (affine_test_problem(8, False, seed), None, None, 2000),
        (affine_test_problem(8, True, seed, bounded=False), None, None, 2000),
    ]
    for prob, alpha, x0, iters in runs:
        alpha = alpha or 0.9 / (math.sqrt(2) * prob.lipschitz_L)
        x0 = initial_point(prob, seed) if x0 is None else x0
        cfg = SolverConfig("SFBF", ConstantStep(alpha), ConstantBatch(1),
                           StoppingRule(1e-300, max_iterations=iters), record_trajectory=True)
        fejer_ok &= deterministic_fejer_check(prob, run(prob, cfg, x0))
    out.append(CheckResult("dynamics/fejer", fejer_ok, "all noiseless trajectories satisfy the Fejer inequality"))
    return out


def validation_suite():
    out = []
    L = 1.0
    sfbf_edge = 1 / math.sqrt(2)
    seg_edge = 1 / math.sqrt(6)
    cases = [
        ("SFBF", sfbf_edge, False), ("SFBF", 0.8, False), ("SFBF", 0.7, True), ("SFBF", 0.1, True),
        ("SEG", seg_edge, False), ("SEG", 0.5, False), ("SEG", 0.40, True),
    ]
    ok = True
    for alg, a, expect in cases:
        ok &= validate_step_size(ConstantStep(a), L, alg).accepted == expect
    out.append(CheckResult("validation/step_bounds", ok, "SFBF bound 1/(sqrt2 L), SEG bound 1/(sqrt6 L)"))

    prob = affine_problem([[1.0]], [1.0], Box([0.0], [np.inf]))
    rejected = overridden = False
    for alg, a in (("SFBF", 0.8), ("SEG", 0.5)):
        try:
            run(prob, SolverConfig(alg, ConstantStep(a), ConstantBatch(1), StoppingRule(max_iterations=1)), [0.0])
        except StepSizeError:
            rejected = True
        else:
            rejected = False
            break
    rep = run(prob, SolverConfig("SFBF", ConstantStep(0.8), ConstantBatch(1), StoppingRule(max_iterations=1),
                                 override_step_check=True), [0.0])
    overridden = rep.iterations == 1
    out.append(CheckResult("validation/run_rejects_unless_overridden", rejected and overridden,
                           f"rejected={rejected}, override ran={overridden}"))

    const = summability_report(ConstantBatch(5), 1000)
    out.append(CheckResult("validation/constant_batch_divergent", const.divergent, f"divergent={const.divergent}"))
    exp = summability_report(ExperimentRule(1), 1_000_000)
    out.append(CheckResult("validation/experiment_rule_sum", exp.partial_sum <= 2.613,
                           f"partial sum {exp.partial_sum:.6f} <= 2.613"))
    return out


SUITES = {
    "projections": projection_suite,
    "oracle": oracle_suite,
    "dynamics": dynamics_suite,
    "validation": validation_suite,
}
