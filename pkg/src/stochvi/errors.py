"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Raised when an argument violates an operation's precondition."""


class UnsupportedOperationError(RuntimeError):
    """Raised when an operation needs data the object does not carry
    (e.g. a closed-form mean operator or a known solution)."""


class NumericError(ArithmeticError):
    """A non-finite value appeared during an iteration.

    Carries the iteration index and the offending iterate so callers can
    build a partial report.
    """

    def __init__(self, message, iteration=None, iterate=None):
        super().__init__(message)
        self.iteration = iteration
        self.iterate = iterate


class StepSizeError(InvalidInputError):
    """A step-size policy exceeds the admissible bound for the given Lipschitz modulus."""

    def __init__(self, alpha_bar, bound, algorithm="SFBF"):
        super().__init__(
            f"{algorithm}: sup step size {alpha_bar:.6g} is not below the bound {bound:.6g}"
        )
        self.alpha_bar = alpha_bar
        self.bound = bound
        self.algorithm = algorithm


class DegenerateSolutionError(InvalidInputError):
    """The LCP point is (numerically) the artificial equilibrium x = 0."""
