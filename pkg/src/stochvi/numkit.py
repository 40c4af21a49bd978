"""Dense linear-algebra and randomness substrate.

Vectors and matrices are plain ``numpy`` float arrays; this module adds
the few things the solvers need on top: reproducible, splittable random
streams and a power-iteration spectral norm.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError

__all__ = [
    "RngStream",
    "SpectralNorm",
    "as_vector",
    "as_matrix",
    "spectral_norm",
    "sample_gaussian",
    "sample_uniform",
]


def as_vector(x, name="x") -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim != 1 or v.size == 0:
        raise InvalidInputError(f"{name} must be a nonempty 1-d vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return v


def as_matrix(m, name="m") -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] == 0 or a.shape[1] == 0:
        raise InvalidInputError(f"{name} must be a nonempty 2-d matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return a


@dataclass(frozen=True)
class RngStream:
    """A named, reproducible random stream.

    The pair ``(seed, path)`` fully determines the sample sequence. Child
    streams extend the path, so a replication index and an oracle-call
    index map to a fixed stream without any shared state. The bit
    generator is Philox (counter based) seeded through ``SeedSequence``.

    Examples
    --------
    >>> s = RngStream(7)
    >>> a = s.child(3, 0).generator.normal()
    >>> b = RngStream(7).child(3, 0).generator.normal()
    >>> a == b
    True
    """

    seed: int
    path: tuple = ()
    _gen: np.random.Generator = field(default=None, init=False, repr=False, compare=False)

    @property
    def stream_id(self) -> tuple:
        return self.path

    def child(self, *keys: int) -> "RngStream":
        return RngStream(self.seed, self.path + tuple(int(k) for k in keys))

    @property
    def generator(self) -> np.random.Generator:
        # one generator per stream value; consuming it advances the counter
        if self._gen is None:
            ss = np.random.SeedSequence(entropy=int(self.seed) & (2**64 - 1), spawn_key=self.path)
            object.__setattr__(self, "_gen", np.random.Generator(np.random.Philox(ss)))
        return self._gen

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self.generator.normal(loc, scale, size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.generator.uniform(low, high, size)


@dataclass(frozen=True)
class SpectralNorm:
    value: float
    converged: bool
    iterations: int

    def __float__(self):
        return self.value


def spectral_norm(m, tol: float = 1e-8, max_iter: int = 10000, rng: RngStream | None = None) -> SpectralNorm:
    """Largest singular value of ``m`` by power iteration on ``m.T @ m``.

    Iterates until the Rayleigh quotient changes by at most ``tol``
    relative to its value. If ``max_iter`` is hit first the result has
    ``converged=False``; callers that need a safe upper bound should
    inflate the value in that case.
    """
    a = as_matrix(m)
    if tol <= 0:
        raise InvalidInputError("tol must be positive")
    if max_iter < 1:
        raise InvalidInputError("max_iter must be positive")
    if not np.any(a):
        return SpectralNorm(0.0, True, 0)
    rng = rng if rng is not None else RngStream(0x5EC7)
    v = rng.generator.standard_normal(a.shape[1])
    v /= np.linalg.norm(v)
    lam = 0.0
    for it in range(1, max_iter + 1):
        w = a.T @ (a @ v)
        lam_new = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            # start vector in the null space; restart along a fresh direction
            v = rng.generator.standard_normal(a.shape[1])
            v /= np.linalg.norm(v)
            continue
        v = w / nw
        if it > 1 and abs(lam_new - lam) <= tol * abs(lam_new):
            return SpectralNorm(float(np.sqrt(max(lam_new, 0.0))), True, it)
        lam = lam_new
    return SpectralNorm(float(np.sqrt(max(lam, 0.0))), False, max_iter)


def sample_gaussian(rng: RngStream, n: int, mean: float = 0.0, sd: float = 1.0) -> np.ndarray:
    if n < 1:
        raise InvalidInputError("n must be a positive integer")
    if sd < 0:
        raise InvalidInputError("sd must be nonnegative")
    if sd == 0:
        return np.full(n, float(mean))
    return rng.generator.normal(mean, sd, n)


def sample_uniform(rng: RngStream, n: int, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    if n < 1:
        raise InvalidInputError("n must be a positive integer")
    if not lo < hi:
        raise InvalidInputError(f"need lo < hi, got lo={lo}, hi={hi}")
    return rng.generator.uniform(lo, hi, n)
