"""
GME Sparse Regularization Library
=================================

Nonconvexly regularized least-squares-type estimation with the generalized
Moreau enhanced (GME) penalty, solved without inner loops:

- linops: linear maps with adjoints, norms and dense materialization
- proxfns: l1 norm, interval indicators, conjugate prox, GME penalty value
- losses: quadratic, Poisson and clipped-Gaussian observation losses
- extrapolate: full-space quadratic extension of a loss beyond an interval box
- gme_model: problem assembly, GME-matrix design, convexity/existence certificates
- solver: the fixed-point iteration and its metric
- serialization: problem files

Typical use:

    loss = build_extrapolated(poisson_loss(y), intervals(5, 40, n))
    weights = relative_strong_convexity_weights(poisson_loss(y), intervals(5, 40, n))
    B = design_B_scalar(0.99, mu, weights, identity(n), first_difference(n))
    P = certify(assemble_problem(loss, identity(n), mu, l1_norm(), first_difference(n), B,
                                 constraint_set=intervals(5, 40, n), weights=weights))
    result = solve(P, default_params(P))
"""

from .exceptions import (
    ConfigError, ConstructionError, ConvergenceError, DesignError, DomainError, GmeError,
    InputError, InvariantError, MetricError, ParameterError, ResourceError, UnboundedCurvatureError,
)
from .linops import (
    LinearMap, dct, dense, diagonal, first_difference, identity, inverse, materialize,
    min_eigenvalue_symmetric, operator_norm, scaled, spectral_norm, zero,
)
from .proxfns import (
    ProxFriendly, SimpleSet, gme_value, indicator, intervals, l1_norm, prox_conjugate,
    prox_l1, project_intervals, whole_space,
)
from .losses import (
    ClippedGaussianLoss, PoissonLoss, QuadraticLoss, SmoothLoss,
    clipped_loss, curvature_bounds, poisson_loss, quadratic_loss,
)
from .extrapolate import (
    CUBIC_QUADRATIC_TAIL, ZERO_TAIL, ExtrapolationTail,
    build_extrapolated, extrapolated_lipschitz, relative_strong_convexity_weights,
)
from .gme_model import (
    GmeProblem, assemble_problem, certify, check_existence, check_overall_convexity,
    decompose_objective, design_B_inverse, design_B_scalar, evaluate_objective,
)
from .solver import (
    SolveResult, SolverParams, SolverState, apply_T, default_initial_state,
    default_params, grad_d, pnorm, solve,
)
from .serialization import dump_problem, load_problem

__version__ = '0.1.0'

__all__ = [
    'GmeError', 'ParameterError', 'InputError', 'DomainError', 'InvariantError', 'ResourceError',
    'ConvergenceError', 'DesignError', 'UnboundedCurvatureError', 'MetricError', 'ConfigError',
    'ConstructionError',
    'LinearMap', 'dense', 'identity', 'zero', 'diagonal', 'first_difference', 'dct', 'scaled',
    'inverse', 'materialize', 'operator_norm', 'spectral_norm', 'min_eigenvalue_symmetric',
    'SimpleSet', 'ProxFriendly', 'intervals', 'whole_space', 'project_intervals', 'prox_l1',
    'l1_norm', 'indicator', 'prox_conjugate', 'gme_value',
    'SmoothLoss', 'QuadraticLoss', 'PoissonLoss', 'ClippedGaussianLoss',
    'quadratic_loss', 'poisson_loss', 'clipped_loss', 'curvature_bounds',
    'ExtrapolationTail', 'ZERO_TAIL', 'CUBIC_QUADRATIC_TAIL',
    'build_extrapolated', 'extrapolated_lipschitz', 'relative_strong_convexity_weights',
    'GmeProblem', 'assemble_problem', 'certify', 'check_overall_convexity', 'check_existence',
    'design_B_inverse', 'design_B_scalar', 'evaluate_objective', 'decompose_objective',
    'SolverParams', 'SolverState', 'SolveResult', 'grad_d', 'default_params', 'apply_T',
    'pnorm', 'default_initial_state', 'solve',
    'load_problem', 'dump_problem',
]
