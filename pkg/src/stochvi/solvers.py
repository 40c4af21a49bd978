"""Stochastic forward-backward-forward (SFBF) and stochastic extragradient
(SEG) iterations, the natural residual, and the run loop."""
from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidInputError, NumericError, UnsupportedOperationError
from .numkit import RngStream
from .oracle import MiniBatchEstimator
from .problems import ProblemInstance
from .schedules import batch_size_at, step_size_at, validate_step_size

__all__ = [
    "ALGORITHMS",
    "StoppingRule",
    "SolverConfig",
    "SolverState",
    "TrajectoryPoint",
    "RunReport",
    "residual",
    "sfbf_step",
    "seg_step",
    "run",
    "deterministic_fejer_check",
    "TRAJECTORY_COLUMNS",
    "trajectory_csv",
]

ALGORITHMS = ("SFBF", "SEG")
TRAJECTORY_COLUMNS = ("n", "residual", "distance", "alpha", "batch", "cumulative_oracle_calls")
DIVERGENCE_BOUND = 1e12


@dataclass(frozen=True)
class StoppingRule:
    residual_tol: float = 1e-3
    residual_alpha: float = 1.0
    max_iterations: int = 10_000
    check_every: int = 1

    def __post_init__(self):
        if not self.residual_tol > 0 or not self.residual_alpha > 0:
            raise InvalidInputError("residual_tol and residual_alpha must be positive")
        if self.max_iterations < 0 or self.check_every < 1:
            raise InvalidInputError("max_iterations must be >= 0 and check_every >= 1")


@dataclass(frozen=True)
class SolverConfig:
    algorithm: str
    step_policy: object
    batch_schedule: object
    stop: StoppingRule = StoppingRule()
    seed: int = 0
    record_trajectory: bool = False
    # skip the step-size bound check (the bound is unknown or knowingly violated)
    override_step_check: bool = False

    def __post_init__(self):
        alg = self.algorithm.upper()
        if alg not in ALGORITHMS:
            raise InvalidInputError(f"algorithm must be one of {ALGORITHMS}")
        object.__setattr__(self, "algorithm", alg)


@dataclass
class SolverState:
    """``x`` is the running iterate (SFBF may leave the set), ``y`` the last
    forward-backward point, which is always feasible."""

    n: int
    x: np.ndarray
    y: Optional[np.ndarray] = None


@dataclass(frozen=True)
class TrajectoryPoint:
    n: int
    residual: float  # r at X_n, with the stopping rule's alpha
    distance: float  # ||X_n - x*||, nan without a known solution
    alpha: float
    batch: int
    oracle_calls: int  # cumulative, after iteration n
    wall_time: float  # seconds since the run started, after iteration n
    step_residual: float  # r at X_n with alpha_n; nan if T is not closed form


@dataclass
class RunReport:
    algorithm: str
    iterations: int
    final_residual: float
    oracle_calls: int
    wall_time: float
    converged: bool
    final_x: np.ndarray
    final_y: Optional[np.ndarray]
    trajectory: Optional[list] = None
    diverged: bool = False
    residual_estimated: bool = False
    batch_sizes: list = field(default_factory=list)
    message: str = ""


def residual(problem: ProblemInstance, x, alpha: float = 1.0, *, surrogate_batch: int = 0,
             rng: Optional[RngStream] = None) -> float:
    """Natural residual ``||x - P(x - alpha T(x))||``.

    Uses the closed-form mean operator. Without one, ``surrogate_batch > 0``
    and ``rng`` select a Monte-Carlo estimate of ``T(x)``.
    """
    if not alpha > 0:
        raise InvalidInputError("alpha must be positive")
    x = np.asarray(x, dtype=float)
    if problem.oracle.has_mean:
        t = problem.oracle.mean(x)
    elif surrogate_batch > 0 and rng is not None:
        t = MiniBatchEstimator(problem.oracle).evaluate_batch(x, surrogate_batch, rng)
    else:
        raise UnsupportedOperationError("residual needs a mean operator or a surrogate batch")
    return float(np.linalg.norm(x - problem.set.project(x - alpha * t)))


def _finite(v, n, what):
    if not np.all(np.isfinite(v)):
        raise NumericError(f"non-finite {what} at iteration {n}", iteration=n, iterate=v)


def sfbf_step(state: SolverState, problem: ProblemInstance, est: MiniBatchEstimator,
              alpha: float, m: int, rng: RngStream) -> SolverState:
    """One SFBF iteration; the two batches use child streams 0 and 1 of ``rng``."""
    x = state.x
    a = est.evaluate_batch(x, m, rng.child(0))
    y = problem.set.project(x - alpha * a)
    b = est.evaluate_batch(y, m, rng.child(1))
    x_new = y + alpha * (a - b)
    _finite(x_new, state.n, "SFBF iterate")
    return SolverState(state.n + 1, x_new, y)


def seg_step(state: SolverState, problem: ProblemInstance, est: MiniBatchEstimator,
             alpha: float, m: int, rng: RngStream) -> SolverState:
    x = state.x
    a = est.evaluate_batch(x, m, rng.child(0))
    y = problem.set.project(x - alpha * a)
    b = est.evaluate_batch(y, m, rng.child(1))
    x_new = problem.set.project(x - alpha * b)
    _finite(x_new, state.n, "SEG iterate")
    return SolverState(state.n + 1, x_new, y)


_STEPS = {"SFBF": sfbf_step, "SEG": seg_step}


def run(problem: ProblemInstance, config: SolverConfig, x0) -> RunReport:
    """Iterate until the natural residual drops below the tolerance or the
    iteration cap is reached.

    Deterministic given ``config.seed``: iteration ``n`` draws its two
    batches from ``RngStream(seed).child(n, 0)`` and ``.child(n, 1)``.
    A non-finite iterate or ``||X_n|| > 1e12`` ends the run with
    ``diverged=True``.
    """
    if not config.override_step_check:
        validate_step_size(config.step_policy, problem.lipschitz_L, config.algorithm).raise_if_rejected()
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (problem.dim,) or not np.all(np.isfinite(x0)):
        raise InvalidInputError("x0 must be a finite vector of the problem's dimension")
    stop = config.stop
    step = _STEPS[config.algorithm]
    root = RngStream(config.seed)
    est = MiniBatchEstimator(problem.oracle)
    estimated = not problem.oracle.has_mean
    x_star = problem.known_solution
    record = config.record_trajectory

    def res(x, alpha, n, m_hint):
        if not estimated:
            return residual(problem, x, alpha)
        # surrogate draws come from a separate stream and are not charged to the run
        return residual(problem, x, alpha, surrogate_batch=max(10_000, 100 * m_hint),
                        rng=root.child(2**31, n))

    state = SolverState(0, x0.copy(), None)
    traj = [] if record else None
    batches = []
    diverged = False
    message = ""
    t0 = time.perf_counter()
    r = res(state.x, stop.residual_alpha, 0, 1)
    while True:
        n = state.n
        if r is not None and r <= stop.residual_tol:
            break
        if n >= stop.max_iterations:
            break
        alpha = step_size_at(config.step_policy, n)
        m = batch_size_at(config.batch_schedule, n)
        if record:
            if r is None:
                r = res(state.x, stop.residual_alpha, n, m)
            dist = float(np.linalg.norm(state.x - x_star)) if x_star is not None else math.nan
            step_r = residual(problem, state.x, alpha) if not estimated else math.nan
        try:
            state = step(state, problem, est, alpha, m, root.child(n))
        except NumericError as exc:
            diverged, message = True, f"iteration {n}: {exc}"
            break
        batches.append(m)
        if record:
            traj.append(TrajectoryPoint(n, r, dist, alpha, m, est.calls, time.perf_counter() - t0, step_r))
        if np.linalg.norm(state.x) > DIVERGENCE_BOUND:
            diverged, message = True, f"||X|| exceeded {DIVERGENCE_BOUND:g} at iteration {state.n}"
            break
        r = None
        if record or state.n % stop.check_every == 0:
            r = res(state.x, stop.residual_alpha, state.n, m)
    wall = time.perf_counter() - t0
    if diverged:
        final_r = math.inf
    else:
        final_r = r if r is not None else res(state.x, stop.residual_alpha, state.n, batches[-1] if batches else 1)
    converged = (not diverged) and final_r <= stop.residual_tol
    return RunReport(
        algorithm=config.algorithm,
        iterations=state.n,
        final_residual=float(final_r),
        oracle_calls=est.calls,
        wall_time=wall,
        converged=bool(converged),
        final_x=state.x,
        final_y=state.y,
        trajectory=traj,
        diverged=diverged,
        residual_estimated=estimated,
        batch_sizes=batches,
        message=message,
    )


def deterministic_fejer_check(problem: ProblemInstance, trajectory, final_x=None, slack: float = 1e-10) -> bool:
    """Check ``d_{n+1}^2 <= d_n^2 - (rho_n / 2) r_{alpha_n}(X_n)^2 + slack`` along a
    noiseless trajectory, with ``d_n = ||X_n - x*||`` and
    ``rho_n = 1 - 2 L^2 alpha_n^2``.

    ``trajectory`` is a list of :class:`TrajectoryPoint` or a
    :class:`RunReport`; passing a report (or ``final_x``) also checks the
    last step.
    """
    if problem.known_solution is None:
        raise UnsupportedOperationError("Fejer check needs a known solution")
    if isinstance(trajectory, RunReport):
        final_x = trajectory.final_x if final_x is None else final_x
        trajectory = trajectory.trajectory
    if trajectory is None:
        raise UnsupportedOperationError("run did not record a trajectory")
    pts = list(trajectory)
    dists = [p.distance for p in pts]
    if final_x is not None and pts:
        dists.append(float(np.linalg.norm(np.asarray(final_x) - problem.known_solution)))
    L = problem.lipschitz_L
    for k in range(len(dists) - 1):
        p = pts[k]
        rho = 1.0 - 2.0 * L * L * p.alpha * p.alpha
        if dists[k + 1] ** 2 > dists[k] ** 2 - 0.5 * rho * p.step_residual ** 2 + slack:
            return False
    return True


def trajectory_csv(report: RunReport, out=None) -> str:
    """Trajectory rows as CSV with the fixed :data:`TRAJECTORY_COLUMNS` order."""
    if report.trajectory is None:
        raise UnsupportedOperationError("run did not record a trajectory")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRAJECTORY_COLUMNS)
    for p in report.trajectory:
        w.writerow([p.n, repr(p.residual), repr(p.distance), repr(p.alpha), p.batch, p.oracle_calls])
    text = buf.getvalue()
    if out is not None:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    return text
