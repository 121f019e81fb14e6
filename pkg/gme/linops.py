"""
Linear Operator Toolkit
=======================

Linear maps with forward/adjoint application used throughout the model:
the observation operator, the sparsifying (analysis) operator, the GME
matrix and the constraint operator.

Features:
- Factory constructors for dense, identity, zero, diagonal, first-difference
  and orthonormal DCT operators
- Scaling, composition (``@``) and sums (``+``/``-``) with automatic adjoints
- Operator norms by seeded power iteration, with exact closed forms where known
- Dense materialization for positive-semidefiniteness checks
- Dense matrix CSV round-trip for fixtures and problem files
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple
import logging
import math

import numpy as np
import scipy.fft
import scipy.linalg

from .config import get_defaults
from .exceptions import ConvergenceError, DesignError, InputError, ResourceError

logger = logging.getLogger(__name__)

KINDS = (
    'dense', 'identity', 'zero', 'diagonal', 'first_difference',
    'dct', 'scaled', 'composed', 'sum',
)

Vector = np.ndarray


@dataclass(frozen=True, eq=False)
class LinearMap:
    """
    Immutable linear operator R^in_dim -> R^out_dim.

    ``apply``/``adjoint_apply`` are the raw callables; call the map itself
    (``L(u)``) to get dimension checking. Kind-specific payloads
    (``matrix``, ``diag``, ``scale``, ``parts``) let closed-form norms,
    inverses and fast materialization bypass generic code paths.
    """
    apply: Callable[[Vector], Vector]
    adjoint_apply: Callable[[Vector], Vector]
    in_dim: int
    out_dim: int
    kind: str
    matrix: Optional[np.ndarray] = None
    diag: Optional[np.ndarray] = None
    scale: float = 1.0
    parts: Tuple['LinearMap', ...] = ()
    transposed: bool = False
    _adjoint: Optional['LinearMap'] = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"Unknown operator kind '{self.kind}'")
        if self.in_dim <= 0 or self.out_dim <= 0:
            raise InputError(f"Operator dimensions must be positive, got {self.out_dim}x{self.in_dim}")

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.out_dim, self.in_dim)

    def __call__(self, u: Vector) -> Vector:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.in_dim,):
            raise InputError(f"{self.kind} operator expects a vector of length {self.in_dim}, got shape {u.shape}")
        return self.apply(u)

    @property
    def T(self) -> 'LinearMap':
        """The adjoint operator."""
        if self._adjoint is not None:
            return self._adjoint
        adj = _build_adjoint(self)
        object.__setattr__(self, '_adjoint', adj)
        object.__setattr__(adj, '_adjoint', self)
        return adj

    def __matmul__(self, other: 'LinearMap') -> 'LinearMap':
        return composed(self, other)

    def __add__(self, other: 'LinearMap') -> 'LinearMap':
        return sum_of(self, other)

    def __sub__(self, other: 'LinearMap') -> 'LinearMap':
        return sum_of(self, scaled(other, -1.0))

    def __rmul__(self, c: float) -> 'LinearMap':
        return scaled(self, c)

    def __neg__(self) -> 'LinearMap':
        return scaled(self, -1.0)

    def __repr__(self) -> str:
        return f"LinearMap(kind={self.kind!r}, shape={self.shape})"


def _build_adjoint(L: LinearMap) -> LinearMap:
    if L.kind == 'dense':
        return dense(L.matrix.T)
    if L.kind in ('identity', 'diagonal'):
        return L
    if L.kind == 'zero':
        return zero(L.out_dim, L.in_dim)
    if L.kind == 'scaled':
        return scaled(L.parts[0].T, L.scale)
    if L.kind == 'composed':
        outer, inner = L.parts
        return composed(inner.T, outer.T)
    if L.kind == 'sum':
        return sum_of(*(p.T for p in L.parts))
    # first_difference and dct flip their transposed flag
    return LinearMap(
        apply=L.adjoint_apply, adjoint_apply=L.apply,
        in_dim=L.out_dim, out_dim=L.in_dim, kind=L.kind,
        transposed=not L.transposed,
    )


# ---------------------------------------------------------------------------
# Constructors
# ---------------------------------------------------------------------------

def dense(M) -> LinearMap:
    """Operator backed by an explicit matrix."""
    M = np.array(M, dtype=float, ndmin=2)
    if not np.all(np.isfinite(M)):
        raise InputError("Dense operator contains non-finite entries")
    M.setflags(write=False)
    return LinearMap(
        apply=lambda u: M @ u,
        adjoint_apply=lambda w: M.T @ w,
        in_dim=M.shape[1], out_dim=M.shape[0], kind='dense', matrix=M,
    )


def identity(n: int) -> LinearMap:
    return LinearMap(
        apply=lambda u: u.copy(), adjoint_apply=lambda w: w.copy(),
        in_dim=n, out_dim=n, kind='identity',
    )


def zero(in_dim: int, out_dim: Optional[int] = None) -> LinearMap:
    out_dim = in_dim if out_dim is None else out_dim
    return LinearMap(
        apply=lambda u: np.zeros(out_dim), adjoint_apply=lambda w: np.zeros(in_dim),
        in_dim=in_dim, out_dim=out_dim, kind='zero',
    )


def diagonal(d) -> LinearMap:
    d = np.array(d, dtype=float).ravel()
    if not np.all(np.isfinite(d)):
        raise InputError("Diagonal operator contains non-finite entries")
    d.setflags(write=False)
    return LinearMap(
        apply=lambda u: d * u, adjoint_apply=lambda w: d * w,
        in_dim=d.size, out_dim=d.size, kind='diagonal', diag=d,
    )


def _difference_adjoint(w: Vector) -> Vector:
    return np.concatenate(([0.0], w)) - np.concatenate((w, [0.0]))


def first_difference(n: int) -> LinearMap:
    """
    First-order difference operator D: R^n -> R^(n-1), (Du)_i = u_{i+1} - u_i.
    """
    if n < 2:
        raise InputError(f"first_difference needs n >= 2, got {n}")
    return LinearMap(
        apply=np.diff, adjoint_apply=_difference_adjoint,
        in_dim=n, out_dim=n - 1, kind='first_difference',
    )


def dct(n: int) -> LinearMap:
    """Orthonormal type-II DCT; its adjoint is the inverse transform."""
    return LinearMap(
        apply=lambda u: scipy.fft.dct(u, type=2, norm='ortho'),
        adjoint_apply=lambda w: scipy.fft.idct(w, type=2, norm='ortho'),
        in_dim=n, out_dim=n, kind='dct',
    )


def scaled(L: LinearMap, c: float) -> LinearMap:
    c = float(c)
    if L.kind == 'scaled':
        return scaled(L.parts[0], c * L.scale)
    return LinearMap(
        apply=lambda u: c * L.apply(u), adjoint_apply=lambda w: c * L.adjoint_apply(w),
        in_dim=L.in_dim, out_dim=L.out_dim, kind='scaled', scale=c, parts=(L,),
    )


def composed(outer: LinearMap, inner: LinearMap) -> LinearMap:
    """outer ∘ inner"""
    if outer.in_dim != inner.out_dim:
        raise InputError(f"Cannot compose {outer.shape} with {inner.shape}")
    return LinearMap(
        apply=lambda u: outer.apply(inner.apply(u)),
        adjoint_apply=lambda w: inner.adjoint_apply(outer.adjoint_apply(w)),
        in_dim=inner.in_dim, out_dim=outer.out_dim, kind='composed', parts=(outer, inner),
    )


def sum_of(*ops: LinearMap) -> LinearMap:
    if not ops:
        raise InputError("sum_of needs at least one operator")
    shape = ops[0].shape
    for op in ops[1:]:
        if op.shape != shape:
            raise InputError(f"Cannot add operators of shapes {shape} and {op.shape}")
    return LinearMap(
        apply=lambda u: sum(op.apply(u) for op in ops),
        adjoint_apply=lambda w: sum(op.adjoint_apply(w) for op in ops),
        in_dim=shape[1], out_dim=shape[0], kind='sum', parts=tuple(ops),
    )


def gram(L: LinearMap) -> LinearMap:
    """L* L"""
    return composed(L.T, L)


def stacked(*ops: LinearMap) -> LinearMap:
    """Vertical stack [L1; L2; ...] as a dense operator (materializes)."""
    return dense(np.vstack([materialize(op) for op in ops]))


# ---------------------------------------------------------------------------
# Spectral quantities
# ---------------------------------------------------------------------------

def operator_norm(L: LinearMap, tol: Optional[float] = None, max_iter: Optional[int] = None) -> float:
    """
    Estimate ||L||_op.

    Closed forms are used for identity, zero, diagonal, dct, first_difference
    and scaled operators; everything else runs power iteration on L*L from a
    start vector seeded with 0.

    Args:
        L: Operator
        tol: Relative change of the Rayleigh quotient that stops the iteration
        max_iter: Iteration cap

    Returns:
        Nonnegative norm estimate

    Raises:
        ConvergenceError: carrying the last estimate when max_iter is reached
    """
    defaults = get_defaults()
    tol = defaults.operator_norm_tol if tol is None else tol
    max_iter = defaults.operator_norm_max_iter if max_iter is None else max_iter
    if tol <= 0:
        raise InputError(f"operator_norm tolerance must be positive, got {tol}")

    if L.kind in ('identity', 'dct'):
        return 1.0
    if L.kind == 'zero':
        return 0.0
    if L.kind == 'diagonal':
        return float(np.max(np.abs(L.diag))) if L.diag.size else 0.0
    if L.kind == 'first_difference':
        n = max(L.in_dim, L.out_dim)
        return 2.0 * math.cos(math.pi / (2 * n))
    if L.kind == 'scaled':
        return abs(L.scale) * operator_norm(L.parts[0], tol, max_iter)

    rng = np.random.default_rng(0)
    u = rng.standard_normal(L.in_dim)
    u /= np.linalg.norm(u)
    rayleigh = 0.0
    for iteration in range(1, max_iter + 1):
        w = L.adjoint_apply(L.apply(u))
        rayleigh_new = float(u @ w)
        w_norm = np.linalg.norm(w)
        if w_norm == 0.0:
            return 0.0
        u = w / w_norm
        if abs(rayleigh_new - rayleigh) <= tol * abs(rayleigh_new):
            return math.sqrt(max(rayleigh_new, 0.0))
        rayleigh = rayleigh_new

    raise ConvergenceError(
        f"Power iteration for {L!r} did not converge in {max_iter} iterations",
        last_value=math.sqrt(max(rayleigh, 0.0)), iterations=max_iter,
    )


def spectral_norm(L: LinearMap, max_entries: Optional[int] = None) -> float:
    """
    ||L||_op, exact (largest singular value of the dense matrix) whenever L
    fits the materialization budget; falls back to ``operator_norm``.
    """
    if L.kind in ('identity', 'dct', 'zero', 'diagonal', 'first_difference'):
        return operator_norm(L)
    if L.kind == 'scaled':
        return abs(L.scale) * spectral_norm(L.parts[0], max_entries)
    max_entries = get_defaults().materialize_max_entries if max_entries is None else max_entries
    if L.in_dim * L.out_dim > max_entries:
        return operator_norm(L)
    return float(scipy.linalg.svdvals(materialize(L, max_entries))[0])


def _checked_symmetric(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InputError(f"Expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InputError("Matrix contains non-finite entries")
    scale = max(1.0, float(np.max(np.abs(M)))) if M.size else 1.0
    if np.max(np.abs(M - M.T), initial=0.0) > 1e-10 * scale:
        logger.warning("Symmetrizing a matrix with noticeable asymmetry")
    return 0.5 * (M + M.T)


def min_eigenvalue_symmetric(M) -> float:
    """Smallest eigenvalue of a dense symmetric matrix (symmetrized first)."""
    S = _checked_symmetric(M)
    return float(scipy.linalg.eigvalsh(S, subset_by_index=[0, 0])[0])


def eigenvalues_symmetric(M) -> np.ndarray:
    """All eigenvalues of a dense symmetric matrix, ascending."""
    return scipy.linalg.eigvalsh(_checked_symmetric(M))


def min_singular_value(L: LinearMap) -> float:
    """Smallest singular value of L viewed as an out_dim x in_dim matrix (0 if wide)."""
    if L.out_dim < L.in_dim:
        return 0.0
    return float(scipy.linalg.svdvals(materialize(L))[-1])


def materialize(L: LinearMap, max_entries: Optional[int] = None) -> np.ndarray:
    """
    Dense matrix of L, built column by column from the standard basis.

    Raises:
        ResourceError: if out_dim * in_dim exceeds the budget
    """
    max_entries = get_defaults().materialize_max_entries if max_entries is None else max_entries
    if L.in_dim * L.out_dim > max_entries:
        raise ResourceError(
            f"Materializing a {L.out_dim}x{L.in_dim} operator exceeds the budget of {max_entries} entries"
        )
    if L.kind == 'dense':
        return np.array(L.matrix)
    if L.kind == 'identity':
        return np.eye(L.in_dim)
    if L.kind == 'zero':
        return np.zeros((L.out_dim, L.in_dim))
    if L.kind == 'diagonal':
        return np.diag(L.diag)

    M = np.empty((L.out_dim, L.in_dim))
    e = np.zeros(L.in_dim)
    for j in range(L.in_dim):
        e[j] = 1.0
        M[:, j] = L.apply(e)
        e[j] = 0.0
    return M


def inverse(L: LinearMap, max_condition: float = 1e12) -> LinearMap:
    """
    Inverse operator for kinds with a known or safely computable inverse.

    Raises:
        DesignError: if L is not (numerically) invertible
    """
    if L.in_dim != L.out_dim:
        raise DesignError(f"Operator of shape {L.shape} is not square, hence not invertible")
    if L.kind == 'identity':
        return L
    if L.kind == 'dct':
        return L.T
    if L.kind == 'diagonal':
        if np.any(L.diag == 0.0):
            raise DesignError("Diagonal operator has zero entries and is not invertible")
        return diagonal(1.0 / L.diag)
    if L.kind == 'scaled':
        if L.scale == 0.0:
            raise DesignError("Zero-scaled operator is not invertible")
        return scaled(inverse(L.parts[0], max_condition), 1.0 / L.scale)
    if L.kind == 'composed':
        outer, inner = L.parts
        return composed(inverse(inner, max_condition), inverse(outer, max_condition))
    if L.kind in ('dense', 'sum'):
        M = materialize(L)
        if np.linalg.cond(M) > max_condition:
            raise DesignError(f"{L!r} is numerically singular")
        return dense(np.linalg.inv(M))
    raise DesignError(f"{L!r} has no inverse")


# ---------------------------------------------------------------------------
# CSV fixtures
# ---------------------------------------------------------------------------

def write_matrix_csv(M, path) -> None:
    """Row-major decimal CSV, 17 significant digits (exact float round-trip)."""
    np.savetxt(path, np.asarray(M, dtype=float), delimiter=',', fmt='%.17g')


def read_matrix_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=',', ndmin=2)
