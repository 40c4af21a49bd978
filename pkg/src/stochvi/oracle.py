"""Stochastic oracles and the mini-batch estimator.

A :class:`StochasticOracle` knows how to draw one sample ``F(x, xi)``;
:class:`MiniBatchEstimator` averages ``m`` fresh draws and keeps count of
every single-sample evaluation it performs.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import InvalidInputError, NumericError, UnsupportedOperationError
from .numkit import RngStream

__all__ = ["StochasticOracle", "MiniBatchEstimator", "mean_operator_eval", "additive_noise_oracle"]


@dataclass(frozen=True)
class StochasticOracle:
    """Sampler for a random operator with optional closed-form mean.

    Parameters
    ----------
    dim : int
        Dimension of the operator's domain and range.
    sampler : callable
        ``sampler(x, rng) -> ndarray`` returning one draw ``F(x, xi)``.
        ``rng`` is an :class:`~stochvi.numkit.RngStream`; the sampler must
        take all its randomness from it.
    mean_operator : callable, optional
        ``T(x) = E[F(x, xi)]`` when it is known in closed form.
    """

    dim: int
    sampler: Callable[[np.ndarray, RngStream], np.ndarray]
    mean_operator: Optional[Callable[[np.ndarray], np.ndarray]] = None

    @property
    def has_mean(self):
        return self.mean_operator is not None

    def mean(self, x):
        if self.mean_operator is None:
            raise UnsupportedOperationError("oracle has no closed-form mean operator")
        return np.asarray(self.mean_operator(np.asarray(x, dtype=float)), dtype=float)


def mean_operator_eval(o: StochasticOracle, x) -> np.ndarray:
    return o.mean(x)


def additive_noise_oracle(mean_operator, dim, sd):
    """``F(x, xi) = T(x) + sd * N(0, I)``; ``sd = 0`` gives the noiseless oracle."""

    def sampler(x, rng):
        t = mean_operator(x)
        if sd == 0:
            return t
        return t + rng.normal(0.0, sd, dim)

    return StochasticOracle(dim, sampler, mean_operator)


class MiniBatchEstimator:
    """Averages fresh oracle draws and counts them.

    ``calls`` grows by exactly ``m`` on every :meth:`evaluate_batch` of
    size ``m``. One estimator belongs to one solver run.
    """

    def __init__(self, oracle: StochasticOracle):
        self.oracle = oracle
        self.calls = 0

    def evaluate_batch(self, x, m: int, rng: RngStream) -> np.ndarray:
        """``(1/m) * sum_i F(x, xi_i)`` over ``m`` draws from ``rng``.

        Pass a distinct child stream for every query; two queries sharing
        a stream would see correlated samples.
        """
        m = int(m)
        if m < 1:
            raise InvalidInputError("batch size must be >= 1")
        x = np.asarray(x, dtype=float)
        if x.shape != (self.oracle.dim,):
            raise InvalidInputError(f"expected x of shape ({self.oracle.dim},), got {x.shape}")
        acc = np.zeros(self.oracle.dim)
        for _ in range(m):
            acc += self.oracle.sampler(x, rng)
        self.calls += m
        est = acc / m
        if not np.all(np.isfinite(est)):
            raise NumericError("oracle returned a non-finite estimate", iterate=x.copy())
        return est

    def empirical_mse(self, x, m: int, reps: int, rng: RngStream) -> float:
        """Mean of ``||batch estimate - T(x)||^2`` over ``reps`` independent batches."""
        if not self.oracle.has_mean:
            raise UnsupportedOperationError("empirical_mse needs a closed-form mean operator")
        if reps < 1:
            raise InvalidInputError("reps must be >= 1")
        t = self.oracle.mean(x)
        total = 0.0
        # batches consume one stream sequentially, so they never share draws
        for _ in range(reps):
            diff = self.evaluate_batch(x, m, rng) - t
            total += float(diff @ diff)
        return total / reps
