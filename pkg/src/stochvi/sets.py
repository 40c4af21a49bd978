"""Closed convex feasible sets and their Euclidean projectors."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .numkit import as_vector

__all__ = ["Box", "NonnegativeOrthant", "WholeSpace", "FeasibleSet", "project", "contains", "set_from_record"]


def _check_dim(dim, x):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != dim:
        raise InvalidInputError(f"dimension mismatch: set has dim {dim}, got shape {x.shape}")
    return x


@dataclass(frozen=True, eq=False)
class Box:
    """``{x : lo <= x <= hi}``; infinite bounds are allowed."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).reshape(-1)
        hi = np.asarray(self.hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape or lo.size == 0:
            raise InvalidInputError("Box bounds must be nonempty and of equal length")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)) or np.any(lo > hi):
            raise InvalidInputError("Box needs lo <= hi componentwise")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self):
        return self.lo.shape[0]

    def project(self, x):
        return np.clip(_check_dim(self.dim, x), self.lo, self.hi)

    def contains(self, x, tol=0.0):
        x = _check_dim(self.dim, x)
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))

    def to_record(self):
        return {"kind": "box", "lo": self.lo.tolist(), "hi": self.hi.tolist()}


@dataclass(frozen=True)
class NonnegativeOrthant:
    dim: int

    def __post_init__(self):
        if int(self.dim) < 1:
            raise InvalidInputError("dim must be positive")

    def project(self, x):
        return np.maximum(_check_dim(self.dim, x), 0.0)

    def contains(self, x, tol=0.0):
        return bool(np.all(_check_dim(self.dim, x) >= -tol))

    def to_record(self):
        return {"kind": "orthant", "dim": int(self.dim)}


@dataclass(frozen=True)
class WholeSpace:
    dim: int

    def __post_init__(self):
        if int(self.dim) < 1:
            raise InvalidInputError("dim must be positive")

    def project(self, x):
        return np.array(_check_dim(self.dim, x), dtype=float)

    def contains(self, x, tol=0.0):
        _check_dim(self.dim, x)
        return True

    def to_record(self):
        return {"kind": "whole", "dim": int(self.dim)}


FeasibleSet = Box | NonnegativeOrthant | WholeSpace


def project(s: FeasibleSet, x) -> np.ndarray:
    """Euclidean projection of ``x`` onto ``s``."""
    return s.project(as_vector(x))


def contains(s: FeasibleSet, x, tol: float = 0.0) -> bool:
    """Whether ``x`` lies in ``s`` up to a componentwise slack ``tol``."""
    if tol < 0:
        raise InvalidInputError("tol must be nonnegative")
    return s.contains(np.asarray(x, dtype=float), tol)


def set_from_record(rec: dict) -> FeasibleSet:
    kind = rec["kind"]
    if kind == "box":
        return Box(np.array(rec["lo"], dtype=float), np.array(rec["hi"], dtype=float))
    if kind == "orthant":
        return NonnegativeOrthant(int(rec["dim"]))
    if kind == "whole":
        return WholeSpace(int(rec["dim"]))
    raise InvalidInputError(f"unknown set kind {kind!r}")
