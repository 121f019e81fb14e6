"""
GME Model Assembly and Certification
====================================

A problem instance is

    minimize  f(A x) + mu * Psi_B(L x)   subject to  C x in Delta

with f a full-space smooth loss, Psi prox-friendly, B the GME matrix, L the
analysis operator and Delta a simple set. This module assembles instances,
designs B, certifies overall convexity and minimizer existence, and
evaluates the cost.
"""

from dataclasses import dataclass, replace
from typing import Optional, Union
import logging
import math

import numpy as np
import scipy.linalg

from . import linops
from .config import get_defaults
from .exceptions import DesignError, InputError, ParameterError
from .extrapolate import ConvexityWeights, relative_strong_convexity_weights
from .linops import LinearMap
from .losses import SmoothLoss
from .proxfns import ProxFriendly, SimpleSet, envelope_minimum, gme_value, whole_space

logger = logging.getLogger(__name__)

EXISTENCE_CONDITIONS = ('iv', 'iii', 'ii', 'i', 'none')

BISECTION_STEPS = 60


@dataclass(frozen=True)
class ConvexityCertificate:
    """Smallest eigenvalue of A*Lambda A - mu L*B*B L and whether it passes."""
    min_eig: float
    holds: bool
    tol: float


@dataclass(frozen=True)
class ExistenceCertificate:
    """
    Which sufficient condition for the existence of a minimizer fired:

    - ``iv``: Delta bounded and C injective
    - ``iii``: f bounded below and L injective
    - ``ii``: f coercive and null(A) ∩ null(L) = {0}
    - ``i``: f coercive and Delta a product of intervals
    - ``none``: nothing could be certified
    """
    condition: str

    @property
    def certified(self) -> bool:
        return self.condition != 'none'


@dataclass(frozen=True, eq=False)
class GmeProblem:
    loss: SmoothLoss
    forward: LinearMap
    mu: float
    psi: ProxFriendly
    analysis: LinearMap
    gme_matrix: LinearMap
    constraint_map: LinearMap
    constraint_set: SimpleSet
    weights: np.ndarray
    lipschitz_grad_f: float
    convexity: Optional[ConvexityCertificate] = None
    existence: Optional[ExistenceCertificate] = None

    @property
    def dim(self) -> int:
        return self.forward.in_dim

    @property
    def convexity_certified(self) -> bool:
        return self.convexity is not None and self.convexity.holds

    @property
    def existence_certified(self) -> bool:
        return self.existence is not None and self.existence.certified

    def __repr__(self) -> str:
        return (
            f"GmeProblem(n={self.dim}, loss={self.loss.kind!r}, mu={self.mu}, "
            f"psi={self.psi.kind!r}, B={self.gme_matrix.kind!r})"
        )


def assemble_problem(
    loss: SmoothLoss,
    forward: LinearMap,
    mu: float,
    psi: ProxFriendly,
    analysis: LinearMap,
    gme_matrix: Optional[LinearMap] = None,
    constraint_map: Optional[LinearMap] = None,
    constraint_set: Optional[SimpleSet] = None,
    weights: Union[ConvexityWeights, np.ndarray, None] = None,
    lipschitz_grad_f: Optional[float] = None,
) -> GmeProblem:
    """
    Validate dimensions and build an uncertified problem.

    Defaults: B = 0 (convex model), C = identity, Delta = whole space,
    Lambda from the loss curvature over the whole space, Lipschitz constant
    from the loss.

    Raises:
        InputError: on incompatible dimensions or malformed weights
        ParameterError: on mu <= 0 or a non-finite Lipschitz constant
    """
    if not (mu > 0 and math.isfinite(mu)):
        raise ParameterError(f"mu must be a positive finite number, got {mu}")
    n = forward.in_dim
    if forward.out_dim != loss.dim:
        raise InputError(f"Forward operator maps to R^{forward.out_dim} but the loss lives on R^{loss.dim}")
    if analysis.in_dim != n:
        raise InputError(f"Analysis operator acts on R^{analysis.in_dim}, expected R^{n}")

    gme_matrix = linops.zero(analysis.out_dim) if gme_matrix is None else gme_matrix
    if gme_matrix.in_dim != analysis.out_dim:
        raise InputError(f"GME matrix acts on R^{gme_matrix.in_dim}, expected R^{analysis.out_dim}")
    constraint_map = linops.identity(n) if constraint_map is None else constraint_map
    if constraint_map.in_dim != n:
        raise InputError(f"Constraint operator acts on R^{constraint_map.in_dim}, expected R^{n}")
    constraint_set = whole_space(constraint_map.out_dim) if constraint_set is None else constraint_set
    if constraint_set.dim != constraint_map.out_dim:
        raise InputError(f"Constraint set lives in R^{constraint_set.dim}, expected R^{constraint_map.out_dim}")

    if weights is None:
        weights = relative_strong_convexity_weights(loss)
    if isinstance(weights, ConvexityWeights):
        weights = weights.diag
    weights = np.array(weights, dtype=float).ravel()
    if weights.shape != (loss.dim,) or np.any(weights < 0) or not np.all(np.isfinite(weights)):
        raise InputError(f"Weights must be {loss.dim} finite nonnegative numbers")
    weights.setflags(write=False)

    lipschitz = loss.lipschitz_constant if lipschitz_grad_f is None else float(lipschitz_grad_f)
    if not (lipschitz > 0 and math.isfinite(lipschitz)):
        raise ParameterError(
            f"Gradient Lipschitz constant must be positive and finite, got {lipschitz}; extrapolate the loss first"
        )

    return GmeProblem(
        loss=loss, forward=forward, mu=float(mu), psi=psi, analysis=analysis,
        gme_matrix=gme_matrix, constraint_map=constraint_map, constraint_set=constraint_set,
        weights=weights, lipschitz_grad_f=lipschitz,
    )


# ---------------------------------------------------------------------------
# Overall convexity
# ---------------------------------------------------------------------------

def _weighted_gram(weights: np.ndarray, forward: LinearMap) -> np.ndarray:
    Ad = linops.materialize(forward)
    return Ad.T @ (weights[:, None] * Ad)


def convexity_matrix(P: GmeProblem) -> np.ndarray:
    """Dense A*Lambda A - mu L*B*B L."""
    M = _weighted_gram(P.weights, P.forward)
    if P.gme_matrix.kind != 'zero':
        BL = linops.materialize(P.gme_matrix @ P.analysis)
        M = M - P.mu * (BL.T @ BL)
    return M


def check_overall_convexity(P: GmeProblem, tol_psd: Optional[float] = None) -> ConvexityCertificate:
    """
    Check A*Lambda A - mu L*B*B L >= 0, which makes the whole cost convex.

    Passes when the smallest eigenvalue is >= -tol_psd * (1 + ||M||).
    """
    tol_psd = get_defaults().psd_tol if tol_psd is None else tol_psd
    if tol_psd < 0:
        raise ParameterError(f"tol_psd must be nonnegative, got {tol_psd}")
    eigs = linops.eigenvalues_symmetric(convexity_matrix(P))
    min_eig = float(eigs[0])
    norm = float(np.max(np.abs(eigs)))
    return ConvexityCertificate(min_eig=min_eig, holds=min_eig >= -tol_psd * (1.0 + norm), tol=tol_psd)


# ---------------------------------------------------------------------------
# GME matrix designers
# ---------------------------------------------------------------------------

def _check_design_args(theta: float, mu: float, weights) -> np.ndarray:
    if not 0.0 <= theta < 1.0:
        raise ParameterError(f"theta must lie in [0, 1), got {theta}")
    if not mu > 0:
        raise ParameterError(f"mu must be positive, got {mu}")
    if isinstance(weights, ConvexityWeights):
        weights = weights.diag
    weights = np.asarray(weights, dtype=float).ravel()
    if np.any(weights < 0):
        raise InputError("Weights must be nonnegative")
    return weights


def design_B_inverse(
    theta: float,
    mu: float,
    weights,
    analysis: LinearMap,
    forward: Optional[LinearMap] = None,
) -> LinearMap:
    """
    B = sqrt(theta/mu) * Lambda^(1/2) L^(-1), so that mu L*B*B L = theta Lambda.

    Requires A = identity and an invertible L; theta = 0 gives B = 0.

    Raises:
        DesignError: if A is not the identity or L has no inverse
    """
    weights = _check_design_args(theta, mu, weights)
    if forward is not None and forward.kind != 'identity':
        raise DesignError(f"Inverse design needs the identity forward operator, got {forward.kind}")
    if weights.size != analysis.in_dim:
        raise InputError(f"Expected {analysis.in_dim} weights, got {weights.size}")
    if theta == 0.0:
        return linops.zero(analysis.out_dim, analysis.in_dim)
    inv = linops.inverse(analysis)
    B = linops.scaled(linops.diagonal(np.sqrt(weights)) @ inv, math.sqrt(theta / mu))
    logger.info(f"Designed GME matrix by inversion (theta={theta}, mu={mu}, n={analysis.in_dim})")
    return B


def design_B_scalar(
    theta: float,
    mu: float,
    weights,
    forward: LinearMap,
    analysis: LinearMap,
) -> LinearMap:
    """
    B = sqrt(theta * c / mu) * identity, with c the largest scalar such that
    A*Lambda A - c L*L >= 0 (found by bisection on the smallest eigenvalue).

    Works for any L; a zero c (e.g. a zero weight on a coordinate L moves)
    yields B = 0 with a warning.
    """
    weights = _check_design_args(theta, mu, weights)
    if weights.size != forward.out_dim:
        raise InputError(f"Expected {forward.out_dim} weights, got {weights.size}")
    z_dim = analysis.out_dim
    if theta == 0.0:
        return linops.zero(z_dim)

    G = _weighted_gram(weights, forward)
    Lm = linops.materialize(analysis)
    LtL = Lm.T @ Lm
    lam_max_L = float(scipy.linalg.eigvalsh(LtL, subset_by_index=[LtL.shape[0] - 1] * 2)[0])
    if lam_max_L <= 0:
        raise DesignError("Analysis operator is zero; there is nothing to design")
    lam_max_G = float(scipy.linalg.eigvalsh(G, subset_by_index=[G.shape[0] - 1] * 2)[0])

    def feasible(c: float) -> bool:
        return linops.min_eigenvalue_symmetric(G - c * LtL) >= 0.0

    lo, hi = 0.0, max(lam_max_G, 0.0) / lam_max_L
    if hi > 0 and feasible(hi):
        lo = hi
    else:
        for _ in range(BISECTION_STEPS):
            mid = 0.5 * (lo + hi)
            if feasible(mid):
                lo = mid
            else:
                hi = mid

    c_star = lo
    if c_star == 0.0:
        logger.warning("Scalar GME design is degenerate (c* = 0); falling back to B = 0, the convex model")
        return linops.zero(z_dim)
    logger.info(f"Designed scalar GME matrix with c*={c_star:.6g} (theta={theta}, mu={mu})")
    return linops.scaled(linops.identity(z_dim), math.sqrt(theta * c_star / mu))


# ---------------------------------------------------------------------------
# Minimizer existence
# ---------------------------------------------------------------------------

def _is_injective(L: LinearMap) -> bool:
    if L.out_dim < L.in_dim:
        return False
    if L.kind in ('identity', 'dct'):
        return True
    s = scipy.linalg.svdvals(linops.materialize(L))
    return bool(s[-1] > 1e-10 * max(1.0, float(s[0])))


def check_existence(P: GmeProblem, declared: Optional[dict] = None) -> ExistenceCertificate:
    """
    Report the first sufficient condition for a minimizer that holds.

    Args:
        P: Problem
        declared: ``{'f_coercive': bool, 'f_bounded_below': bool}``; taken
            from the loss when omitted

    Returns:
        ExistenceCertificate (condition 'none' when nothing fires)
    """
    if declared is None:
        declared = {'f_coercive': P.loss.coercive, 'f_bounded_below': P.loss.bounded_below}
    coercive = bool(declared.get('f_coercive', False))
    bounded_below = bool(declared.get('f_bounded_below', False))

    if P.constraint_set.is_bounded and _is_injective(P.constraint_map):
        condition = 'iv'
    elif bounded_below and _is_injective(P.analysis):
        condition = 'iii'
    elif coercive and _is_injective(linops.stacked(P.forward, P.analysis)):
        condition = 'ii'
    elif coercive and P.constraint_set.is_intervals:
        condition = 'i'
    else:
        condition = 'none'
    return ExistenceCertificate(condition=condition)


def certify(P: GmeProblem, declared: Optional[dict] = None, tol_psd: Optional[float] = None) -> GmeProblem:
    """Return a copy of P carrying its convexity and existence certificates."""
    convexity = check_overall_convexity(P, tol_psd)
    existence = check_existence(P, declared)
    if convexity.holds:
        logger.info(
            f"Certified {P!r}: min_eig={convexity.min_eig:.3e}, existence condition {existence.condition}"
        )
    else:
        logger.warning(f"Overall convexity fails for {P!r}: min_eig={convexity.min_eig:.3e}")
    return replace(P, convexity=convexity, existence=existence)


# ---------------------------------------------------------------------------
# Objective
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ObjectiveValue:
    fidelity: float
    regularizer: float
    total: float
    feasible: bool


@dataclass(frozen=True)
class ObjectiveDecomposition:
    """Cost split into three convex terms (when overall convexity holds)."""
    smooth: float
    convex_reg: float
    conjugate: float
    total: float


def _checked_point(P: GmeProblem, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (P.dim,):
        raise InputError(f"Expected a point in R^{P.dim}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InputError("Point contains non-finite entries")
    return x


def evaluate_objective(P: GmeProblem, x, inner_tol: Optional[float] = None) -> ObjectiveValue:
    """
    f(Ax) + mu * Psi_B(Lx), plus whether Cx lies in Delta.

    Raises:
        ConvergenceError: if the inner minimization of the GME penalty stalls
    """
    x = _checked_point(P, x)
    fidelity = P.loss.value(P.forward.apply(x))
    regularizer = gme_value(P.psi, P.gme_matrix, P.analysis.apply(x), inner_tol)
    feasible = P.constraint_set.contains(P.constraint_map.apply(x), tol=get_defaults().feasibility_tol)
    return ObjectiveValue(
        fidelity=fidelity, regularizer=regularizer,
        total=fidelity + P.mu * regularizer, feasible=feasible,
    )


def decompose_objective(P: GmeProblem, x, inner_tol: Optional[float] = None) -> ObjectiveDecomposition:
    """
    Split the cost as d(x) + mu Psi(Lx) + mu (Psi + 0.5||B.||^2)*(B*B L x), where
    d(x) = f(Ax) - mu/2 ||B L x||^2.
    """
    x = _checked_point(P, x)
    z = P.analysis.apply(x)
    half_sq = 0.5 * float(np.sum(P.gme_matrix.apply(z) ** 2))
    smooth = P.loss.value(P.forward.apply(x)) - P.mu * half_sq
    convex_reg = P.mu * P.psi.value(z)
    conjugate = P.mu * (half_sq - envelope_minimum(P.psi, P.gme_matrix, z, inner_tol))
    return ObjectiveDecomposition(
        smooth=smooth, convex_reg=convex_reg, conjugate=conjugate,
        total=smooth + convex_reg + conjugate,
    )
