"""Step-size policies and batch-size schedules.

Iteration indices are 0-based throughout: ``step_size_at(p, n)`` is the
step used by the n-th solver iteration and ``batch_size_at(s, n)`` is the
batch drawn for each of its two oracle queries.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidInputError, StepSizeError

__all__ = [
    "ConstantStep",
    "BoundedStep",
    "StepValidation",
    "step_size_at",
    "step_bound",
    "validate_step_size",
    "paper_game_step",
    "paper_fractional_step",
    "ConstantBatch",
    "ExperimentRule",
    "PolyLog",
    "batch_size_at",
    "SummabilityReport",
    "summability_report",
]

SQRT2 = math.sqrt(2.0)
SQRT6 = math.sqrt(6.0)


# -- step sizes ---------------------------------------------------------------


@dataclass(frozen=True)
class ConstantStep:
    alpha: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise InvalidInputError("step size must be positive")

    @property
    def lower(self):
        return self.alpha

    @property
    def upper(self):
        return self.alpha

    def at(self, n):
        return self.alpha


@dataclass(frozen=True)
class BoundedStep:
    """Step sequence ``values(n)`` with declared bounds ``lower <= values(n) <= upper``.

    Values outside the bounds are clipped, so the declared bounds are the
    ones validation reasons about.
    """

    values: Callable[[int], float]
    lower: float
    upper: float

    def __post_init__(self):
        if not 0 < self.lower <= self.upper:
            raise InvalidInputError("need 0 < lower <= upper")

    def at(self, n):
        return float(min(max(self.values(n), self.lower), self.upper))


def step_size_at(p, n: int) -> float:
    return p.at(n)


def step_bound(L: float, algorithm: str = "SFBF") -> float:
    """Largest admissible sup step size: ``1/(sqrt(2) L)`` for SFBF, ``1/(sqrt(6) L)`` for SEG."""
    if not L > 0:
        raise InvalidInputError("Lipschitz modulus must be positive")
    alg = algorithm.upper()
    if alg == "SFBF":
        return 1.0 / (SQRT2 * L)
    if alg == "SEG":
        return 1.0 / (SQRT6 * L)
    raise InvalidInputError(f"unknown algorithm {algorithm!r}")


@dataclass(frozen=True)
class StepValidation:
    accepted: bool
    alpha_bar: float
    bound: float
    rho_lower: float  # 1 - 2 L^2 alpha_bar^2
    algorithm: str

    def raise_if_rejected(self):
        if not self.accepted:
            raise StepSizeError(self.alpha_bar, self.bound, self.algorithm)


def validate_step_size(p, L: float, algorithm: str = "SFBF") -> StepValidation:
    """Check ``sup alpha_n`` against the admissible bound for ``algorithm``.

    For SFBF acceptance is equivalent to ``rho_lower > 0``. SEG uses the
    tighter ``1/(sqrt(6) L)`` bound; ``rho_lower`` is still reported with
    the SFBF formula.
    """
    bound = step_bound(L, algorithm)
    alpha_bar = float(p.upper)
    # rho = 1 - 2 L^2 a^2 = (1 - t)(1 + t) with t = a / sfbf_bound; the sign of
    # 1 - t is exact, so "rho > 0" and "a < bound" agree in floating point
    t = alpha_bar / step_bound(L, "SFBF")
    rho = (1.0 - t) * (1.0 + t)
    accepted = alpha_bar < bound
    return StepValidation(bool(accepted), alpha_bar, bound, rho, algorithm.upper())


def paper_game_step(L: float, algorithm: str) -> ConstantStep:
    """``0.99/(sqrt(2) L)`` for SFBF and ``0.99/(sqrt(6) L)`` for SEG."""
    return ConstantStep(0.99 * step_bound(L, algorithm))


def paper_fractional_step(d: int, algorithm: str) -> ConstantStep:
    """``10/d`` for SFBF and ``10/(sqrt(3) d)`` for SEG (no Lipschitz bound available)."""
    alpha = 10.0 / d
    if algorithm.upper() == "SEG":
        alpha /= math.sqrt(3.0)
    return ConstantStep(alpha)


# -- batch sizes ----------------------------------------------------------------


@dataclass(frozen=True)
class ConstantBatch:
    m: int

    def __post_init__(self):
        if int(self.m) < 1:
            raise InvalidInputError("batch size must be >= 1")

    def at(self, n):
        return int(self.m)

    def to_record(self):
        return {"kind": "constant", "m": int(self.m)}


@dataclass(frozen=True)
class ExperimentRule:
    """``m = max(1, [ (n+1)^1.5 / d ])``.

    ``rounding`` selects the bracket: ``"round"`` is round-half-up,
    ``"ceil"`` the ceiling.
    """

    d: int
    rounding: str = "round"

    def __post_init__(self):
        if int(self.d) < 1:
            raise InvalidInputError("d must be a positive integer")
        if self.rounding not in ("round", "ceil"):
            raise InvalidInputError("rounding must be 'round' or 'ceil'")

    def at(self, n):
        y = (n + 1) ** 1.5 / self.d
        m = math.ceil(y) if self.rounding == "ceil" else math.floor(y + 0.5)
        return max(1, int(m))

    def to_record(self):
        return {"kind": "experiment", "d": int(self.d), "rounding": self.rounding}


@dataclass(frozen=True)
class PolyLog:
    """``m = ceil(c * (n+n0)^(1+a) * ln(n+n0)^(1+b))``, floored at 1.

    Summable when ``a > 0, b >= -1`` or ``a = 0, b > 0``. With ``b = -1``
    the log factor is 1 and ``n0 >= 1`` suffices; otherwise ``n0 >= 2`` so
    that the logarithm never vanishes.
    """

    c: float
    n0: int
    a: float
    b: float

    def __post_init__(self):
        if not self.c > 0:
            raise InvalidInputError("c must be positive")
        if not ((self.a > 0 and self.b >= -1) or (self.a == 0 and self.b > 0)):
            raise InvalidInputError("need a > 0 and b >= -1, or a = 0 and b > 0")
        min_n0 = 1 if self.b == -1 else 2
        if int(self.n0) < min_n0:
            raise InvalidInputError(f"n0 must be >= {min_n0} for b = {self.b}")

    def _value(self, t):
        t = np.asarray(t, dtype=float)
        logf = np.ones_like(t) if self.b == -1 else np.log(t) ** (1 + self.b)
        return self.c * t ** (1 + self.a) * logf

    def at(self, n):
        return max(1, int(math.ceil(float(self._value(n + self.n0)))))

    def tail_bound(self, horizon):
        """Upper bound on ``sum_{n >= horizon} 1/m_n`` by comparison with an integral."""
        t0 = horizon - 1 + self.n0  # f is decreasing, so sum_{n>=H} f(n) <= int_{H-1}^inf f
        if self.a > 0:
            # ln(t)^(1+b) >= ln(t0)^(1+b) on [t0, inf) as 1+b >= 0
            logf = 1.0 if self.b == -1 else math.log(t0) ** (1 + self.b)
            if logf <= 0:
                return math.inf
            return t0 ** (-self.a) / (self.c * self.a * logf)
        if t0 <= 1:
            return math.inf
        return 1.0 / (self.c * self.b * math.log(t0) ** self.b)

    def to_record(self):
        return {"kind": "polylog", "c": self.c, "n0": int(self.n0), "a": self.a, "b": self.b}


def batch_size_at(s, n: int) -> int:
    return s.at(n)


def batch_from_record(rec: dict, dim: int | None = None):
    kind = rec.get("kind")
    if kind == "constant":
        return ConstantBatch(int(rec["m"]))
    if kind == "experiment":
        d = rec.get("d") or dim
        if d is None:
            raise InvalidInputError("experiment batch rule needs d")
        return ExperimentRule(int(d), rec.get("rounding", "round"))
    if kind == "polylog":
        return PolyLog(float(rec["c"]), int(rec["n0"]), float(rec["a"]), float(rec["b"]))
    raise InvalidInputError(f"unknown batch rule {kind!r}")


@dataclass(frozen=True)
class SummabilityReport:
    horizon: int
    partial_sum: float
    tail_bound: float  # inf when no bound is available
    divergent: bool


def summability_report(s, horizon: int) -> SummabilityReport:
    """Partial sum of ``1/m_n`` over the first ``horizon`` batches plus a tail bound."""
    if horizon < 1:
        raise InvalidInputError("horizon must be >= 1")
    if isinstance(s, ConstantBatch):
        return SummabilityReport(horizon, horizon / s.m, math.inf, True)
    n = np.arange(horizon, dtype=float)
    if isinstance(s, ExperimentRule):
        y = (n + 1) ** 1.5 / s.d
        m = np.ceil(y) if s.rounding == "ceil" else np.floor(y + 0.5)
        m = np.maximum(m, 1.0)
        partial = float(np.sum(1.0 / m))
        # once y >= 1, [y] >= y/2, so the tail is at most 2d * int_H^inf t^-1.5 dt
        tail = 4.0 * s.d / math.sqrt(horizon) if (horizon + 1) ** 1.5 >= s.d else math.inf
        return SummabilityReport(horizon, partial, tail, False)
    if isinstance(s, PolyLog):
        m = np.maximum(np.ceil(s._value(n + s.n0)), 1.0)
        return SummabilityReport(horizon, float(np.sum(1.0 / m)), s.tail_bound(horizon), False)
    ms = np.array([s.at(k) for k in range(horizon)], dtype=float)
    return SummabilityReport(horizon, float(np.sum(1.0 / ms)), math.inf, False)
