"""Problem generators: quadratic fractional programs, bimatrix games in LCP
form, and small affine test problems with a known solution.

Every generator is a pure function of its arguments and a seed; the
returned :class:`ProblemInstance` can be serialized as a short record
(family, seed, sizes, parameters) and regenerated bit-for-bit.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from .errors import DegenerateSolutionError, InvalidInputError
from .numkit import RngStream, as_matrix, as_vector, spectral_norm
from .oracle import StochasticOracle
from .sets import Box, FeasibleSet, NonnegativeOrthant, WholeSpace

__all__ = [
    "ProblemInstance",
    "FractionalProgramData",
    "BimatrixGameData",
    "AffineData",
    "EquilibriumProfile",
    "generate_fractional",
    "fractional_problem",
    "generate_game",
    "game_problem",
    "game_matrix",
    "recover_equilibrium",
    "verify_complementarity",
    "affine_problem",
    "affine_test_problem",
    "initial_point",
    "problem_record",
    "problem_from_record",
    "GAME_KINDS",
]

GAME_KINDS = ("zero_sum", "symmetric", "asymmetric")

# child-stream keys under a problem seed
_DATA, _START, _LIPSCHITZ = 1, 2, 3


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """``VI(T, X)``: a feasible set, a stochastic oracle for ``T`` and metadata.

    ``lipschitz_L`` is an upper estimate of the Lipschitz modulus of the
    mean operator; ``metadata["lipschitz_source"]`` records whether it came
    from a spectral norm, from sampling, or was supplied.
    """

    dim: int
    set: FeasibleSet
    oracle: StochasticOracle
    lipschitz_L: float
    known_solution: Optional[np.ndarray] = None
    data: Any = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.oracle.dim != self.dim or self.set.dim != self.dim:
            raise InvalidInputError("oracle, set and problem dimensions disagree")

    @property
    def family(self):
        return self.metadata.get("family", "custom")

    def mean(self, x):
        return self.oracle.mean(x)


# -- fractional programs ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FractionalProgramData:
    """``min E[G(x, xi) / h(x)]`` over a box with ``G`` quadratic and ``h`` affine.

    ``G(x, xi) = x'Q(xi)x/2 + c(xi)'x + q(xi)`` with
    ``Q(xi) = Q + (V + V')/2``, ``c(xi) = c + c1``, ``q(xi) = q + q1`` and
    all of ``V, c1, q1`` having iid ``N(0, noise_sd^2)`` entries.
    """

    Q: np.ndarray
    c: np.ndarray
    q: float
    a: np.ndarray
    b: float
    noise_sd: float = 0.1

    @property
    def dim(self):
        return self.c.shape[0]

    def h(self, x):
        return float(self.a @ x + self.b)

    def G(self, x, Q=None, c=None, q=None):
        Q = self.Q if Q is None else Q
        c = self.c if c is None else c
        q = self.q if q is None else q
        return float(0.5 * x @ (Q @ x) + c @ x + q)

    @staticmethod
    def _quotient_grad(Qx, c, q, x, a, h):
        # grad of G/h = ((Qx + c) h - G a) / h^2
        G = 0.5 * float(x @ Qx) + float(c @ x) + q
        return ((Qx + c) * h - G * a) / (h * h)

    def mean_operator(self, x):
        return self._quotient_grad(self.Q @ x, self.c, self.q, x, self.a, self.h(x))

    def jacobian(self, x):
        """Jacobian of the mean operator:
        ``Q/h - (g a' + a g')/h^2 + 2 G a a'/h^3`` with ``g = Qx + c``."""
        h = self.h(x)
        g = self.Q @ x + self.c
        ga = np.outer(g, self.a)
        return self.Q / h - (ga + ga.T) / h ** 2 + 2.0 * self.G(x) * np.outer(self.a, self.a) / h ** 3

    def sample(self, x, rng: RngStream):
        if self.noise_sd == 0:
            return self.mean_operator(x)
        d, sd = self.dim, self.noise_sd
        g = rng.generator
        V = g.normal(0.0, sd, (d, d))
        Qx = self.Q @ x + 0.5 * (V @ x + V.T @ x)
        c = self.c + g.normal(0.0, sd, d)
        q = self.q + g.normal(0.0, sd)
        return self._quotient_grad(Qx, c, q, x, self.a, self.h(x))


def fractional_problem(data: FractionalProgramData, box: Box, lipschitz_L=None, rng=None, metadata=None):
    """Wrap fractional-program data as a :class:`ProblemInstance`.

    Without an explicit ``lipschitz_L`` the modulus is estimated as 1.2 times
    the largest Jacobian spectral norm over the two extreme corners of the box
    and 100 random points in it. Difference quotients between random pairs
    average the curvature out and underestimate badly, so they are not used.
    """
    d = data.dim
    if np.any(data.a <= 0) or data.b <= 0 or np.any(box.lo < 0):
        raise InvalidInputError("need a > 0, b > 0 and a nonnegative box so that h > 0")
    oracle = StochasticOracle(d, data.sample, data.mean_operator)
    meta = {"family": "fractional", "lipschitz_source": "given" if lipschitz_L is not None else "sampled_jacobian"}
    if lipschitz_L is None:
        rng = rng if rng is not None else RngStream(0)
        g = rng.generator
        hi = np.where(np.isfinite(box.hi), box.hi, box.lo + 10.0)
        points = [box.lo, hi] + [g.uniform(box.lo, hi) for _ in range(100)]
        best = 0.0
        for x in points:
            norm = spectral_norm(data.jacobian(x), rng=rng.child(0))
            best = max(best, norm.value if norm.converged else 1.01 * norm.value)
        lipschitz_L = 1.2 * best if best > 0 else 1.0
    meta.update(metadata or {})
    return ProblemInstance(d, box, oracle, float(lipschitz_L), None, data, meta)


def generate_fractional(d: int, seed: int, noise_sd: float = 0.1) -> ProblemInstance:
    """Random quadratic fractional program on a box.

    ``Q = M'M + I`` with ``M`` iid Uniform(0,1); ``a, c ~ U(0,2)^d``;
    ``q ~ U(1,2)``; ``b = 1 + 4d``; box lower bounds ``U(0,1)^d`` and
    upper bounds ten above them.
    """
    if int(d) < 1:
        raise InvalidInputError("d must be >= 1")
    d = int(d)
    root = RngStream(seed)
    g = root.child(_DATA).generator
    M = g.uniform(0.0, 1.0, (d, d))
    Q = M.T @ M + np.eye(d)
    a = g.uniform(0.0, 2.0, d)
    c = g.uniform(0.0, 2.0, d)
    q = float(g.uniform(1.0, 2.0))
    b = 1.0 + 4.0 * d
    lo = g.uniform(0.0, 1.0, d)
    box = Box(lo, lo + 10.0)
    data = FractionalProgramData(Q, c, q, a, b, noise_sd)
    meta = {"seed": int(seed), "d": d, "noise_sd": noise_sd, "M_distribution": "uniform(0,1)"}
    return fractional_problem(data, box, rng=root.child(_LIPSCHITZ), metadata=meta)


# -- bimatrix games ------------------------------------------------------------------


def game_matrix(U_I, U_II) -> np.ndarray:
    """The block matrix ``[[0, -U_I], [-U_II', 0]]``."""
    U_I = as_matrix(U_I, "U_I")
    U_II = as_matrix(U_II, "U_II")
    if U_I.shape != U_II.shape:
        raise InvalidInputError("U_I and U_II must both be n_I x n_II")
    n1, n2 = U_I.shape
    M = np.zeros((n1 + n2, n1 + n2))
    M[:n1, n1:] = -U_I
    M[n1:, :n1] = -U_II.T
    return M


@dataclass(frozen=True, eq=False)
class BimatrixGameData:
    """A bimatrix game ``(U_I, U_II)`` and its LCP operator ``T(x) = 1 + M x``.

    The noisy oracle perturbs ``M`` only: ``F(x, xi) = 1 + (M + V) x``
    with ``V`` iid ``N(0, noise_sd^2)``.
    """

    U_I: np.ndarray
    U_II: np.ndarray
    kind: str = "asymmetric"
    noise_sd: float = 0.1
    M: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "M", game_matrix(self.U_I, self.U_II))

    @property
    def n_I(self):
        return self.U_I.shape[0]

    @property
    def n_II(self):
        return self.U_I.shape[1]

    @property
    def dim(self):
        return self.n_I + self.n_II

    def mean_operator(self, x):
        return 1.0 + self.M @ x

    def sample(self, x, rng: RngStream):
        if self.noise_sd == 0:
            return self.mean_operator(x)
        V = rng.generator.normal(0.0, self.noise_sd, self.M.shape)
        return 1.0 + (self.M + V) @ x


def game_problem(game: BimatrixGameData, metadata=None) -> ProblemInstance:
    norm = spectral_norm(game.M)
    L = norm.value if norm.converged else 1.01 * norm.value
    meta = {"family": game.kind, "lipschitz_source": "spectral_norm", "lipschitz_converged": norm.converged}
    meta.update(metadata or {})
    oracle = StochasticOracle(game.dim, game.sample, game.mean_operator)
    return ProblemInstance(game.dim, NonnegativeOrthant(game.dim), oracle, max(L, 1e-12), None, game, meta)


def generate_game(n_I: int, n_II: int, kind: str, seed: int, noise_sd: float = 0.1,
                  orientation: str = "payoff") -> ProblemInstance:
    """Random bimatrix game with Uniform(0,1) entries in LCP form.

    ``kind`` is ``"zero_sum"`` (``U_II = -U_I``), ``"symmetric"``
    (``U_I = (U + U')/2``, ``U_II = U_I'``) or ``"asymmetric"``
    (independent draws). ``orientation="loss"`` negates both matrices
    before ``M`` is assembled, turning ``M`` entrywise nonnegative off the
    diagonal blocks.
    """
    n_I, n_II = int(n_I), int(n_II)
    if n_I < 1 or n_II < 1:
        raise InvalidInputError("player strategy counts must be positive")
    if kind not in GAME_KINDS:
        raise InvalidInputError(f"kind must be one of {GAME_KINDS}")
    if kind in ("symmetric", "zero_sum") and n_I != n_II:
        raise InvalidInputError(f"{kind} games need n_I == n_II")
    if orientation not in ("payoff", "loss"):
        raise InvalidInputError("orientation must be 'payoff' or 'loss'")
    g = RngStream(seed).child(_DATA).generator
    A = g.uniform(0.0, 1.0, (n_I, n_II))
    if kind == "zero_sum":
        U_I = A
        U_II = -A
    elif kind == "symmetric":
        U_I = 0.5 * (A + A.T)
        U_II = U_I.T.copy()
    else:
        U_I = A
        U_II = g.uniform(0.0, 1.0, (n_I, n_II))
    if orientation == "loss":
        U_I, U_II = -U_I, -U_II
    game = BimatrixGameData(U_I, U_II, kind, noise_sd)
    meta = {"seed": int(seed), "n_I": n_I, "n_II": n_II, "noise_sd": noise_sd,
            "orientation": orientation,
            "symmetrization": "(U+U^T)/2" if kind == "symmetric" else None}
    return game_problem(game, meta)


@dataclass(frozen=True, eq=False)
class EquilibriumProfile:
    p: np.ndarray
    q: np.ndarray
    v: float
    u: float


def _game_of(game):
    return game.data if isinstance(game, ProblemInstance) else game


def recover_equilibrium(game, x, tol: float = 1e-9) -> EquilibriumProfile:
    """Mixed strategies from an LCP point: ``p = v x1`` with ``v = 1/sum(x1)``, same for ``q``.

    Small negative entries (the SFBF iterate need not be feasible) are
    clipped before normalizing.
    """
    game = _game_of(game)
    x = as_vector(x)
    if x.shape[0] != game.dim:
        raise InvalidInputError("x has the wrong dimension for this game")
    x1 = np.maximum(x[: game.n_I], 0.0)
    x2 = np.maximum(x[game.n_I:], 0.0)
    s1, s2 = x1.sum(), x2.sum()
    if s1 <= tol or s2 <= tol:
        raise DegenerateSolutionError(
            f"block sums ({s1:.3g}, {s2:.3g}) <= {tol:g}: x is the artificial equilibrium"
        )
    v, u = 1.0 / s1, 1.0 / s2
    return EquilibriumProfile(x1 * v, x2 * u, float(v), float(u))


def verify_complementarity(game, x, tol: float = 1e-3) -> bool:
    """``x >= -tol``, ``T(x) >= -tol`` and ``|<x, T(x)>| <= tol (1 + ||x||)``."""
    game = _game_of(game)
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        return False
    t = game.mean_operator(x)
    return bool(
        np.all(x >= -tol)
        and np.all(t >= -tol)
        and abs(float(x @ t)) <= tol * (1.0 + np.linalg.norm(x))
    )


# -- affine test problems --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AffineData:
    """``T(x) = A (x - x_star)`` with optional additive Gaussian noise."""

    A: np.ndarray
    x_star: np.ndarray
    noise_sd: float = 0.0

    def mean_operator(self, x):
        return self.A @ (x - self.x_star)

    def sample(self, x, rng: RngStream):
        t = self.mean_operator(x)
        if self.noise_sd == 0:
            return t
        return t + rng.generator.normal(0.0, self.noise_sd, t.shape[0])


def affine_problem(A, x_star, feasible_set: FeasibleSet, noise_sd: float = 0.0, metadata=None) -> ProblemInstance:
    """Affine VI with a prescribed solution; ``x_star`` must be feasible."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    x_star = as_vector(x_star, "x_star")
    if A.shape != (x_star.shape[0], x_star.shape[0]):
        raise InvalidInputError("A must be d x d with d = len(x_star)")
    if not feasible_set.contains(x_star, 1e-12):
        raise InvalidInputError("x_star must lie in the feasible set")
    data = AffineData(A, x_star, noise_sd)
    norm = spectral_norm(A)
    L = norm.value if norm.converged else 1.01 * norm.value
    meta = {"family": "affine", "lipschitz_source": "spectral_norm", "lipschitz_converged": norm.converged,
            "noise_sd": noise_sd}
    meta.update(metadata or {})
    oracle = StochasticOracle(x_star.shape[0], data.sample, data.mean_operator)
    return ProblemInstance(x_star.shape[0], feasible_set, oracle, max(L, 1e-12), x_star.copy(), data, meta)


def affine_test_problem(d: int, strong: bool, seed: int, noise_sd: float = 0.0, bounded: bool = True) -> ProblemInstance:
    """Random affine VI with known solution.

    ``strong=True`` uses ``A = S'S + I`` (strongly monotone), otherwise the
    skew matrix ``A = S - S'`` whose quadratic form vanishes. ``x_star`` is
    drawn in ``(-1, 1)^d`` inside the box ``[-5, 5]^d`` (or all of R^d
    when ``bounded=False``).
    """
    if int(d) < 1:
        raise InvalidInputError("d must be >= 1")
    d = int(d)
    g = RngStream(seed).child(_DATA).generator
    S = g.normal(0.0, 1.0 / np.sqrt(d), (d, d))
    A = S.T @ S + np.eye(d) if strong else S - S.T
    x_star = g.uniform(-1.0, 1.0, d)
    fs = Box(np.full(d, -5.0), np.full(d, 5.0)) if bounded else WholeSpace(d)
    meta = {"seed": int(seed), "d": d, "strong": bool(strong), "bounded": bool(bounded)}
    return affine_problem(A, x_star, fs, noise_sd, meta)


# -- starting points and serialization ----------------------------------------------------


def initial_point(problem: ProblemInstance, seed: Optional[int] = None) -> np.ndarray:
    """Random start: ``U(1,10)^d`` for fractional programs, ``U(0,1)^d`` for
    games, ``x_star + U(-1,1)^d`` for affine problems."""
    meta = problem.metadata
    seed = meta.get("seed", 0) if seed is None else seed
    g = RngStream(seed).child(_START).generator
    d = problem.dim
    fam = problem.family
    if fam == "fractional":
        return g.uniform(1.0, 10.0, d)
    if fam in GAME_KINDS:
        return g.uniform(0.0, 1.0, d)
    if fam == "affine" and problem.known_solution is not None:
        return problem.set.project(problem.known_solution + g.uniform(-1.0, 1.0, d))
    return g.uniform(0.0, 1.0, d)


def problem_record(problem: ProblemInstance) -> dict:
    """Replayable description of a generated problem (matrices are not stored)."""
    meta = problem.metadata
    fam = problem.family
    if "seed" not in meta:
        raise InvalidInputError("only generated problems can be serialized")
    if fam == "fractional":
        params = {"d": meta["d"], "noise_sd": meta["noise_sd"]}
    elif fam in GAME_KINDS:
        params = {"n_I": meta["n_I"], "n_II": meta["n_II"], "noise_sd": meta["noise_sd"],
                  "orientation": meta["orientation"]}
    elif fam == "affine":
        params = {"d": meta["d"], "strong": meta["strong"], "noise_sd": meta["noise_sd"],
                  "bounded": meta["bounded"]}
    else:
        raise InvalidInputError(f"cannot serialize family {fam!r}")
    return {"family": fam, "seed": meta["seed"], "dim": problem.dim, "params": params}


def problem_from_record(rec: dict) -> ProblemInstance:
    fam, seed, p = rec["family"], int(rec["seed"]), rec["params"]
    if fam == "fractional":
        return generate_fractional(p["d"], seed, p["noise_sd"])
    if fam in GAME_KINDS:
        return generate_game(p["n_I"], p["n_II"], fam, seed, p["noise_sd"], p.get("orientation", "payoff"))
    if fam == "affine":
        return affine_test_problem(p["d"], p["strong"], seed, p["noise_sd"], p.get("bounded", True))
    raise InvalidInputError(f"unknown family {fam!r}")
