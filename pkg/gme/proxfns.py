"""
Prox-friendly functions and simple sets.

Provides the l1 norm, interval/box indicators and their proximity operators,
the conjugate prox through the Moreau identity, and evaluation of the GME
penalty value by an inner proximal-gradient minimization (diagnostics only;
the solver never evaluates the GME value).
"""

from dataclasses import dataclass
from typing import Callable, Optional
import logging
import math

import numpy as np

from .config import get_defaults
from .exceptions import ConvergenceError, InputError, InvariantError, ParameterError
from .linops import LinearMap, operator_norm

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SimpleSet:
    """
    Product of closed intervals [lo_i, hi_i] (bounds may be infinite), or an
    arbitrary closed convex set given by a projection callback.
    """
    dim: int
    lo: Optional[np.ndarray] = None
    hi: Optional[np.ndarray] = None
    projector: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.projector is not None:
            return
        lo = np.broadcast_to(np.asarray(self.lo, dtype=float), (self.dim,)).copy()
        hi = np.broadcast_to(np.asarray(self.hi, dtype=float), (self.dim,)).copy()
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
            raise InvariantError("Interval bounds must not be NaN")
        if np.any(lo == np.inf) or np.any(hi == -np.inf):
            raise InvariantError("Interval bounds must satisfy lo < inf and hi > -inf")
        bad = np.flatnonzero(lo > hi)
        if bad.size:
            i = int(bad[0])
            raise InvariantError(f"Interval {i} has lo={lo[i]} > hi={hi[i]}")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, 'lo', lo)
        object.__setattr__(self, 'hi', hi)

    @property
    def is_intervals(self) -> bool:
        return self.projector is None

    @property
    def is_bounded(self) -> bool:
        return self.is_intervals and bool(np.all(np.isfinite(self.lo)) and np.all(np.isfinite(self.hi)))

    @property
    def is_whole_space(self) -> bool:
        return self.is_intervals and bool(np.all(self.lo == -np.inf) and np.all(self.hi == np.inf))

    def project(self, u: np.ndarray) -> np.ndarray:
        return project_intervals(self, u)

    def contains(self, u: np.ndarray, tol: float = 0.0) -> bool:
        u = np.asarray(u, dtype=float)
        if self.is_intervals:
            return bool(np.all(u >= self.lo - tol) and np.all(u <= self.hi + tol))
        return bool(np.max(np.abs(self.project(u) - u), initial=0.0) <= tol)


def intervals(lo, hi, dim: Optional[int] = None) -> SimpleSet:
    """Product of intervals; scalar bounds are broadcast to ``dim``."""
    if dim is None:
        dim = np.broadcast(np.asarray(lo), np.asarray(hi)).size
    return SimpleSet(dim=dim, lo=lo, hi=hi)


def whole_space(dim: int) -> SimpleSet:
    return SimpleSet(dim=dim, lo=-np.inf, hi=np.inf)


def custom_set(dim: int, projector: Callable[[np.ndarray], np.ndarray]) -> SimpleSet:
    """Closed convex set known only through its metric projection."""
    return SimpleSet(dim=dim, projector=projector)


def project_intervals(S: SimpleSet, u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (S.dim,):
        raise InputError(f"Projection expects a vector of length {S.dim}, got shape {u.shape}")
    if S.projector is not None:
        return np.asarray(S.projector(u), dtype=float)
    return np.clip(u, S.lo, S.hi)


@dataclass(frozen=True, eq=False)
class ProxFriendly:
    """
    Convex function with an exact proximity operator at every scale.

    ``minimum`` is the global minimum value (needed when the GME matrix is
    zero and the Moreau-type envelope degenerates to min Psi).
    """
    value: Callable[[np.ndarray], float]
    prox: Callable[[np.ndarray, float], np.ndarray]
    kind: str
    minimum: float = 0.0
    coercive: bool = False
    constraint: Optional[SimpleSet] = None


def prox_l1(x: np.ndarray, gamma: float) -> np.ndarray:
    """Soft threshold: sign(x) * max(|x| - gamma, 0)."""
    if not gamma > 0:
        raise ParameterError(f"prox scale must be positive, got {gamma}")
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - gamma, 0.0)


def l1_norm() -> ProxFriendly:
    return ProxFriendly(
        value=lambda x: float(np.sum(np.abs(x))),
        prox=prox_l1,
        kind='l1',
        minimum=0.0,
        coercive=True,
    )


def indicator(S: SimpleSet) -> ProxFriendly:
    """Indicator of a simple set; its prox at any scale is the projection."""
    if not S.is_intervals:
        raise InputError("indicator() needs an interval product; use the set's projector directly")

    def value(x):
        return 0.0 if S.contains(x) else math.inf

    def prox(x, gamma):
        if not gamma > 0:
            raise ParameterError(f"prox scale must be positive, got {gamma}")
        return S.project(x)

    return ProxFriendly(
        value=value,
        prox=prox,
        kind='box' if S.is_bounded else 'product_intervals',
        minimum=0.0,
        coercive=S.is_bounded,
        constraint=S,
    )


def prox_conjugate(F: ProxFriendly, x: np.ndarray, gamma: float = 1.0) -> np.ndarray:
    """
    Prox of gamma * F* via the Moreau decomposition:
    Prox_{gamma F*}(x) = x - gamma * Prox_{F/gamma}(x / gamma).
    """
    if not gamma > 0:
        raise ParameterError(f"prox scale must be positive, got {gamma}")
    x = np.asarray(x, dtype=float)
    if gamma == 1.0:
        return x - F.prox(x, 1.0)
    return x - gamma * F.prox(x / gamma, 1.0 / gamma)


def envelope_minimum(
    psi: ProxFriendly,
    B: LinearMap,
    z: np.ndarray,
    inner_tol: Optional[float] = None,
    max_iter: Optional[int] = None,
) -> float:
    """
    min_v [Psi(v) + 0.5 * ||B(z - v)||^2] by accelerated proximal gradient.

    Step 1/||B||^2, stopped when the prox-gradient residual drops below
    ``inner_tol``. A zero B collapses the problem to min Psi.

    Raises:
        ConvergenceError: with the best value found so far
    """
    defaults = get_defaults()
    inner_tol = defaults.inner_tol if inner_tol is None else inner_tol
    max_iter = defaults.inner_max_iter if max_iter is None else max_iter
    if not inner_tol > 0:
        raise ParameterError(f"inner_tol must be positive, got {inner_tol}")

    z = np.asarray(z, dtype=float)
    lipschitz = operator_norm(B) ** 2
    if lipschitz == 0.0:
        return psi.minimum

    step = 1.0 / lipschitz
    v = z.copy()
    y = v
    t = 1.0
    best = psi.value(z)
    for iteration in range(1, max_iter + 1):
        grad = B.adjoint_apply(B.apply(y - z))
        v_new = psi.prox(y - step * grad, step)
        residual = lipschitz * float(np.linalg.norm(v_new - y))
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        y = v_new + ((t - 1.0) / t_new) * (v_new - v)
        v, t = v_new, t_new

        current = psi.value(v) + 0.5 * float(np.sum(B.apply(z - v) ** 2))
        best = min(best, current)
        if residual < inner_tol:
            return best

    raise ConvergenceError(
        f"Inner GME minimization did not reach tol {inner_tol} in {max_iter} iterations",
        last_value=best, iterations=max_iter,
    )


def gme_value(
    psi: ProxFriendly,
    B: LinearMap,
    z: np.ndarray,
    inner_tol: Optional[float] = None,
    max_iter: Optional[int] = None,
) -> float:
    """
    Generalized Moreau enhanced penalty Psi_B(z) = Psi(z) - min_v[Psi(v) + 0.5||B(z - v)||^2].

    Args:
        psi: Coercive prox-friendly convex function
        B: GME matrix
        z: Evaluation point
        inner_tol: Inner prox-gradient residual tolerance
        max_iter: Inner iteration cap

    Returns:
        Nonnegative penalty value

    Raises:
        ConvergenceError: with ``last_value`` set to the penalty implied by the best inner value
    """
    psi_z = psi.value(z)
    try:
        envelope = envelope_minimum(psi, B, z, inner_tol, max_iter)
    except ConvergenceError as exc:
        raise ConvergenceError(
            str(exc), last_value=max(psi_z - exc.last_value, 0.0), iterations=exc.iterations,
        ) from exc
    return max(psi_z - envelope, 0.0)
