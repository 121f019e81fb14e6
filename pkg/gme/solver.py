"""
Inner-Loop-Free Fixed-Point Solver
==================================

Solves a certified GME problem by iterating an averaged nonexpansive operator
T on the product space H = X x Z x Z x C-range. Every step needs only
operator applications, one prox of Psi, one prox of its conjugate and one
projection onto Delta; the GME penalty itself is never evaluated.

The metric that makes T averaged is the block operator

    [ sigma I      -mu L*B*B   -mu L*   -mu C* ]
    [ -mu B*B L     tau I       0        0     ]
    [ -mu L         0           mu I     0     ]
    [ -mu C         0           0        mu I  ]

which is positive definite for the parameters chosen by ``default_params``.
"""

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple
import logging
import math

import numpy as np

from . import linops
from .config import get_defaults
from .exceptions import ConvergenceError, InputError, MetricError, ParameterError
from .gme_model import GmeProblem, evaluate_objective
from .proxfns import prox_conjugate

logger = logging.getLogger(__name__)

SIGMA_SAFETY = 1.001


@dataclass(frozen=True)
class OperatorNorms:
    """Operator norms the step sizes depend on."""
    forward: float
    gme_matrix: float
    analysis_constraint: float  # ||L*L + C*C||
    gme_analysis: float  # ||B*B L||


@dataclass(frozen=True)
class SolverParams:
    rho: float
    sigma: float
    tau: float
    theta: float
    tol: float
    max_iter: int
    lipschitz_grad_d: float
    norms: Optional[OperatorNorms] = None

    def __post_init__(self):
        for name in ('rho', 'sigma', 'tau', 'tol', 'lipschitz_grad_d'):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ParameterError(f"Solver parameter {name} must be positive and finite, got {value}")
        if self.max_iter < 1:
            raise ParameterError(f"max_iter must be at least 1, got {self.max_iter}")
        if not self.tau > 1.0 / (2.0 * self.rho):
            raise ParameterError(f"tau={self.tau} must exceed 1/(2 rho)={1.0 / (2.0 * self.rho)}")
        if not self.theta < 2.0:
            raise ParameterError(f"Averagedness constant theta={self.theta} must be below 2")


@dataclass(frozen=True, eq=False)
class SolverState:
    """A point h = (x, v, w, z) of the product space."""
    x: np.ndarray
    v: np.ndarray
    w: np.ndarray
    z: np.ndarray
    iteration: int = 0
    residual_P: float = math.nan

    def blocks(self) -> Tuple[np.ndarray, ...]:
        return (self.x, self.v, self.w, self.z)

    def distance(self, other: 'SolverState') -> float:
        """Plain product-space distance."""
        return math.sqrt(sum(float(np.sum((a - b) ** 2)) for a, b in zip(self.blocks(), other.blocks())))

    def __sub__(self, other: 'SolverState') -> 'SolverState':
        return SolverState(*(a - b for a, b in zip(self.blocks(), other.blocks())))


@dataclass
class SolveResult:
    """
    Outcome of ``solve``.

    ``residuals`` holds ||h_k - h_(k-1)||_H for every iteration;
    ``metric_residuals`` the same in the metric norm when requested;
    ``objective_samples`` (iteration, cost) pairs every ``trace_every`` steps.
    """
    x: np.ndarray
    state: SolverState
    converged: bool
    iterations: int
    residuals: List[float] = field(default_factory=list)
    metric_residuals: List[float] = field(default_factory=list)
    objective_samples: List[Tuple[int, float]] = field(default_factory=list)

    @property
    def final_residual(self) -> float:
        return self.residuals[-1] if self.residuals else math.nan

    def trace_rows(self) -> List[dict]:
        """Rows for the trace CSV: iteration, residual_H, residual_P, objective."""
        objective = dict(self.objective_samples)
        rows = []
        for k, residual in enumerate(self.residuals, start=1):
            rows.append({
                'iteration': k,
                'residual_H': residual,
                'residual_P': self.metric_residuals[k - 1] if k <= len(self.metric_residuals) else None,
                'objective': objective.get(k),
            })
        return rows


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------

def _norm_of_gram_sum(analysis: linops.LinearMap, constraint_map: linops.LinearMap) -> float:
    # ||L*L + C*C||; exact shortcut when one of them is orthonormal
    if constraint_map.kind in ('identity', 'dct'):
        return linops.spectral_norm(analysis) ** 2 + 1.0
    if analysis.kind in ('identity', 'dct'):
        return linops.spectral_norm(constraint_map) ** 2 + 1.0
    return linops.spectral_norm(linops.gram(analysis) + linops.gram(constraint_map))


def problem_norms(P: GmeProblem) -> OperatorNorms:
    B = P.gme_matrix
    if B.kind == 'zero':
        gme_norm = gme_analysis = 0.0
    else:
        gme_norm = linops.spectral_norm(B)
        gme_analysis = linops.spectral_norm(B.T @ B @ P.analysis)
    return OperatorNorms(
        forward=linops.spectral_norm(P.forward),
        gme_matrix=gme_norm,
        analysis_constraint=_norm_of_gram_sum(P.analysis, P.constraint_map),
        gme_analysis=gme_analysis,
    )


def _averagedness(mu: float, rho: float, sigma: float, tau: float, norms: OperatorNorms) -> float:
    nlc, nbbl = norms.analysis_constraint, norms.gme_analysis
    denominator = rho * (sigma * tau - tau * mu * nlc - mu * mu * nbbl * nbbl)
    if not denominator > 0:
        raise ParameterError(f"Step sizes sigma={sigma}, tau={tau} do not make the metric positive definite")
    return (sigma + tau - mu * nlc) / denominator


def default_params(P: GmeProblem, tol: Optional[float] = None, max_iter: Optional[int] = None) -> SolverParams:
    """
    Step sizes that make T averaged in a positive definite metric.

    rho = 1 / max(L_d, mu ||B||^2) with L_d = L_f ||A||^2, tau = 3 / (2 rho),
    sigma = 1.001 (mu ||L*L + C*C|| + (2 rho mu^2 ||B*B L||^2 + tau) / (2 rho tau - 1)).

    Raises:
        ParameterError: if P is not convexity-certified or the derived
            parameters are invalid (a sign of a bad norm estimate)
    """
    if not P.convexity_certified:
        raise ParameterError(f"{P!r} is not certified as overall convex; call certify() first")
    defaults = get_defaults()
    tol = defaults.solver_tol if tol is None else tol
    max_iter = defaults.solver_max_iter if max_iter is None else max_iter

    norms = problem_norms(P)
    mu = P.mu
    lipschitz_grad_d = P.lipschitz_grad_f * norms.forward ** 2
    rho = 1.0 / max(lipschitz_grad_d, mu * norms.gme_matrix ** 2)
    tau = 3.0 / (2.0 * rho)
    sigma = SIGMA_SAFETY * (
        mu * norms.analysis_constraint
        + (2.0 * rho * mu * mu * norms.gme_analysis ** 2 + tau) / (2.0 * rho * tau - 1.0)
    )
    theta = _averagedness(mu, rho, sigma, tau, norms)

    params = SolverParams(
        rho=rho, sigma=sigma, tau=tau, theta=theta, tol=tol, max_iter=max_iter,
        lipschitz_grad_d=lipschitz_grad_d, norms=norms,
    )
    margin = metric_margin(P, params)
    if not margin > 0:
        raise ParameterError(f"Metric margin {margin} is not positive")
    logger.debug(f"Solver parameters for {P!r}: rho={rho:.4g} sigma={sigma:.4g} tau={tau:.4g} theta={theta:.6f}")
    return params


def metric_margin(P: GmeProblem, params: SolverParams) -> float:
    """sigma - mu ||L*L + C*C|| - mu^2 ||B*B L||^2 / tau; positive implies a positive definite metric."""
    norms = params.norms or problem_norms(P)
    return (
        params.sigma
        - P.mu * norms.analysis_constraint
        - P.mu ** 2 * norms.gme_analysis ** 2 / params.tau
    )


# ---------------------------------------------------------------------------
# Operator T and metric
# ---------------------------------------------------------------------------

def _gme_gram(P: GmeProblem, u: np.ndarray) -> np.ndarray:
    B = P.gme_matrix
    if B.kind == 'zero':
        return np.zeros_like(u)
    return B.adjoint_apply(B.apply(u))


def grad_d(P: GmeProblem, x: np.ndarray) -> np.ndarray:
    """Gradient of d(x) = f(Ax) - mu/2 ||B L x||^2: A* grad f(Ax) - mu L*B*B L x."""
    x = np.asarray(x, dtype=float)
    grad = P.forward.adjoint_apply(P.loss.gradient(P.forward.apply(x)))
    if P.gme_matrix.kind != 'zero':
        grad = grad - P.mu * P.analysis.adjoint_apply(_gme_gram(P, P.analysis.apply(x)))
    return grad


def apply_T(P: GmeProblem, params: SolverParams, h: SolverState) -> SolverState:
    x, v, w, z = h.blocks()
    mu, sigma, tau = P.mu, params.sigma, params.tau
    L, C = P.analysis, P.constraint_map

    xi = (
        x - grad_d(P, x) / sigma
        - (mu / sigma) * L.adjoint_apply(_gme_gram(P, v) + w)
        - (mu / sigma) * C.adjoint_apply(z)
    )
    L_xi = L.apply(xi)
    L_x = L.apply(x)

    zeta = P.psi.prox(v + (mu / tau) * _gme_gram(P, 2.0 * L_xi - L_x - v), mu / tau)
    eta = prox_conjugate(P.psi, 2.0 * L_xi - L_x + w)
    u = 2.0 * C.apply(xi) - C.apply(x) + z
    varsigma = u - P.constraint_set.project(u)
    return SolverState(x=xi, v=zeta, w=eta, z=varsigma, iteration=h.iteration + 1)


def pnorm(P: GmeProblem, params: SolverParams, h: SolverState) -> float:
    """sqrt(<P h, h>) by block application."""
    x, v, w, z = h.blocks()
    mu = P.mu
    L_x = P.analysis.apply(x)
    diagonal_part = (
        params.sigma * float(x @ x) + params.tau * float(v @ v)
        + mu * float(w @ w) + mu * float(z @ z)
    )
    coupling = 2.0 * mu * (
        float(_gme_gram(P, L_x) @ v) + float(L_x @ w) + float(P.constraint_map.apply(x) @ z)
    )
    q = diagonal_part - coupling
    if q < -1e-12 * max(1.0, diagonal_part):
        raise MetricError(f"Metric quadratic form is negative ({q}); the step sizes are invalid")
    return math.sqrt(max(q, 0.0))


def materialize_metric(P: GmeProblem, params: SolverParams) -> np.ndarray:
    """Dense block matrix of the solver metric (diagnostics only)."""
    mu = P.mu
    n = P.dim
    Lm = linops.materialize(P.analysis)
    Cm = linops.materialize(P.constraint_map)
    Bm = linops.materialize(P.gme_matrix)
    BtB = Bm.T @ Bm
    p, q = Lm.shape[0], Cm.shape[0]
    return np.block([
        [params.sigma * np.eye(n), -mu * Lm.T @ BtB, -mu * Lm.T, -mu * Cm.T],
        [-mu * BtB @ Lm, params.tau * np.eye(p), np.zeros((p, p)), np.zeros((p, q))],
        [-mu * Lm, np.zeros((p, p)), mu * np.eye(p), np.zeros((p, q))],
        [-mu * Cm, np.zeros((q, p)), np.zeros((q, p)), mu * np.eye(q)],
    ])


def default_initial_state(P: GmeProblem) -> SolverState:
    """
    x0 = projection of the observation onto Delta when A and C are identities,
    otherwise 0; the dual blocks start at 0.
    """
    if P.forward.kind == 'identity' and P.constraint_map.kind == 'identity':
        x0 = P.constraint_set.project(np.array(P.loss.observation))
    else:
        x0 = np.zeros(P.dim)
    p = P.analysis.out_dim
    return SolverState(x=x0, v=np.zeros(p), w=np.zeros(p), z=np.zeros(P.constraint_map.out_dim))


def _check_state(P: GmeProblem, h: SolverState):
    expected = (P.dim, P.analysis.out_dim, P.analysis.out_dim, P.constraint_map.out_dim)
    actual = tuple(np.shape(b)[0] if np.ndim(b) == 1 else -1 for b in h.blocks())
    if actual != expected:
        raise InputError(f"Initial state has block sizes {actual}, expected {expected}")


def _sample_objective(P: GmeProblem, x: np.ndarray) -> float:
    try:
        return evaluate_objective(P, x).total
    except ConvergenceError as exc:
        logger.debug(f"Objective sample uses an inexact GME value: {exc}")
        return P.loss.value(P.forward.apply(x)) + P.mu * exc.last_value


def solve(
    P: GmeProblem,
    params: SolverParams,
    h0: Optional[SolverState] = None,
    trace_every: int = 0,
    metric_trace: bool = False,
    callback: Optional[Callable[[SolverState, float], None]] = None,
) -> SolveResult:
    """
    Iterate h_(k+1) = T(h_k) until ||h_k - h_(k-1)||_H < tol or max_iter.

    Args:
        P: Convexity-certified problem
        params: Solver parameters (see ``default_params``)
        h0: Initial state (``default_initial_state`` when omitted)
        trace_every: Sample the cost every k iterations (0 disables)
        metric_trace: Also record residuals in the metric norm
        callback: Called with (state, residual_H) after every iteration

    Returns:
        SolveResult; hitting max_iter is reported as converged=False
    """
    if not P.convexity_certified:
        raise ParameterError(f"{P!r} is not certified as overall convex; call certify() first")
    if P.existence is not None and not P.existence.certified:
        logger.warning(f"No existence condition holds for {P!r}; iterates may diverge")
    h = default_initial_state(P) if h0 is None else h0
    _check_state(P, h)

    result = SolveResult(x=h.x, state=h, converged=False, iterations=0)
    k = 0
    logger.info(f"Solving {P!r} (tol={params.tol}, max_iter={params.max_iter})")
    for k in range(1, params.max_iter + 1):
        h_next = apply_T(P, params, h)
        residual = h_next.distance(h)
        result.residuals.append(residual)
        if metric_trace:
            residual_P = pnorm(P, params, h_next - h)
            result.metric_residuals.append(residual_P)
            h_next = SolverState(*h_next.blocks(), iteration=k, residual_P=residual_P)
        if trace_every and k % trace_every == 0:
            result.objective_samples.append((k, _sample_objective(P, h_next.x)))
        if callback is not None:
            callback(h_next, residual)
        h = h_next
        if not math.isfinite(residual):
            logger.error(f"Solver diverged at iteration {k} (residual {residual})")
            break
        if residual < params.tol:
            result.converged = True
            break

    result.state = h
    result.x = h.x
    result.iterations = k
    if result.converged:
        logger.info(f"Converged in {result.iterations} iterations (residual {result.final_residual:.3e})")
    else:
        logger.warning(
            f"Stopped after {result.iterations} iterations without reaching tol {params.tol} "
            f"(last residual {result.final_residual:.3e})"
        )
    return result
