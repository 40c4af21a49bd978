"""Variance-reduced stochastic forward-backward-forward and extragradient
solvers for stochastic variational inequalities."""

from .errors import (
    DegenerateSolutionError,
    InvalidInputError,
    NumericError,
    StepSizeError,
    UnsupportedOperationError,
)
from .numkit import RngStream, sample_gaussian, sample_uniform, spectral_norm
from .oracle import MiniBatchEstimator, StochasticOracle, mean_operator_eval
from .problems import (
    ProblemInstance,
    affine_problem,
    affine_test_problem,
    generate_fractional,
    generate_game,
    initial_point,
    recover_equilibrium,
    verify_complementarity,
)
from .schedules import (
    BoundedStep,
    ConstantBatch,
    ConstantStep,
    ExperimentRule,
    PolyLog,
    paper_fractional_step,
    paper_game_step,
    batch_size_at,
    step_size_at,
    summability_report,
    validate_step_size,
)
from .sets import Box, NonnegativeOrthant, WholeSpace, contains, project
from .solvers import (
    RunReport,
    SolverConfig,
    SolverState,
    StoppingRule,
    deterministic_fejer_check,
    residual,
    run,
    seg_step,
    sfbf_step,
)

__version__ = "0.1.0"
