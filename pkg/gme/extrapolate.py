"""
Quadratic extrapolation of separable losses.

A loss that is only well behaved on an interval product Pi (for example the
Poisson loss, whose curvature blows up at 0) is replaced outside Pi by its
second-order Taylor polynomial at the nearest finite endpoint, plus an
optional convex tail r of the distance to that endpoint. The result is
finite and twice continuously differentiable on the whole space, agrees with
the original loss on Pi, and has a computable gradient Lipschitz constant.
"""

from dataclasses import dataclass
import logging

import numpy as np

from .exceptions import ConstructionError, DomainError, InputError, InvariantError, UnboundedCurvatureError
from .losses import SmoothLoss, curvature_bounds
from .proxfns import SimpleSet

logger = logging.getLogger(__name__)

TAIL_KINDS = ('zero', 'cubic_quadratic')


@dataclass(frozen=True)
class ExtrapolationTail:
    """
    Convex C^2 tail r with r(0) = r'(0) = r''(0) = 0 and bounded r''.

    ``zero`` is r = 0. ``cubic_quadratic`` is t^3/6 on (0, 1) and
    t^2/2 - t/2 + 1/6 from 1 on, which keeps a coercive loss coercive.
    """
    kind: str = 'zero'

    def __post_init__(self):
        if self.kind not in TAIL_KINDS:
            raise InputError(f"Unknown tail kind '{self.kind}', expected one of {TAIL_KINDS}")

    @property
    def sup_second(self) -> float:
        return 0.0 if self.kind == 'zero' else 1.0

    def value(self, d) -> np.ndarray:
        d = np.asarray(d, dtype=float)
        if self.kind == 'zero':
            return np.zeros_like(d)
        return np.where(d <= 0, 0.0, np.where(d < 1, d ** 3 / 6.0, 0.5 * d * d - 0.5 * d + 1.0 / 6.0))

    def first(self, d) -> np.ndarray:
        d = np.asarray(d, dtype=float)
        if self.kind == 'zero':
            return np.zeros_like(d)
        return np.where(d <= 0, 0.0, np.where(d < 1, 0.5 * d * d, d - 0.5))

    def second(self, d) -> np.ndarray:
        d = np.asarray(d, dtype=float)
        if self.kind == 'zero':
            return np.zeros_like(d)
        return np.where(d <= 0, 0.0, np.where(d < 1, d, 1.0))


ZERO_TAIL = ExtrapolationTail('zero')
CUBIC_QUADRATIC_TAIL = ExtrapolationTail('cubic_quadratic')


def _checked_intervals(loss: SmoothLoss, intervals: SimpleSet) -> SimpleSet:
    if not intervals.is_intervals or intervals.dim != loss.dim:
        raise InputError(f"Extrapolation needs a product of {loss.dim} intervals")
    degenerate = np.flatnonzero(intervals.lo == intervals.hi)
    if degenerate.size:
        i = int(degenerate[0])
        raise InvariantError(f"Interval {i} is degenerate (lo = hi = {intervals.lo[i]})")
    return intervals


class ExtrapolatedLoss(SmoothLoss):
    """
    Full-space extension of ``base`` beyond the intervals ``[lo, hi]``.

    Coordinates with an infinite endpoint keep the base branch on that side.
    Coercivity and boundedness declarations are inherited from the base loss.
    """
    kind = 'extrapolated'

    def __init__(self, base: SmoothLoss, intervals: SimpleSet, tail: ExtrapolationTail = ZERO_TAIL):
        super().__init__(base.observation)
        _checked_intervals(base, intervals)
        self.base = base
        self.intervals = intervals
        self.tail = tail
        self.coercive = base.coercive
        self.bounded_below = base.bounded_below

        lo, hi = intervals.lo, intervals.hi
        self.has_lo = np.isfinite(lo)
        self.has_hi = np.isfinite(hi)
        safe = np.where(self.has_lo, lo, np.where(self.has_hi, hi, 0.0))
        anchor_lo = np.where(self.has_lo, lo, safe)
        anchor_hi = np.where(self.has_hi, hi, safe)
        try:
            self._f_lo = base.values(anchor_lo)
            self._d1_lo = base.derivative(anchor_lo)
            self._d2_lo = base.second_derivative(anchor_lo)
            self._f_hi = base.values(anchor_hi)
            self._d1_hi = base.derivative(anchor_hi)
            self._d2_hi = base.second_derivative(anchor_hi)
            bounds = curvature_bounds(base, intervals)
        except DomainError as exc:
            raise ConstructionError(f"Cannot anchor the extrapolation at the interval endpoints: {exc}") from exc

        unbounded = np.flatnonzero(~np.isfinite(bounds.sup_hess))
        if unbounded.size:
            i = int(unbounded[0])
            raise UnboundedCurvatureError(f"Coordinate {i}: second derivative is unbounded on [{lo[i]}, {hi[i]}]")
        self.bounds = bounds
        self._lipschitz = float(np.max(bounds.sup_hess, initial=0.0)) + tail.sup_second

    @property
    def lipschitz_constant(self) -> float:
        return self._lipschitz

    def _branches(self, t):
        left = self.has_lo & (t <= self.intervals.lo)
        right = self.has_hi & (t >= self.intervals.hi)
        return left, right

    def _inside(self, t):
        return np.clip(t, self.intervals.lo, self.intervals.hi)

    def values(self, t):
        t = self._check(t)
        out = self.base.values(self._inside(t))
        left, right = self._branches(t)
        d = np.where(left, t - self.intervals.lo, 0.0)
        out = np.where(
            left,
            0.5 * self._d2_lo * d * d + self._d1_lo * d + self._f_lo + self.tail.value(-d),
            out,
        )
        d = np.where(right, t - self.intervals.hi, 0.0)
        out = np.where(
            right,
            0.5 * self._d2_hi * d * d + self._d1_hi * d + self._f_hi + self.tail.value(d),
            out,
        )
        return out

    def derivative(self, t):
        t = self._check(t)
        out = self.base.derivative(self._inside(t))
        left, right = self._branches(t)
        d = np.where(left, t - self.intervals.lo, 0.0)
        out = np.where(left, self._d2_lo * d + self._d1_lo - self.tail.first(-d), out)
        d = np.where(right, t - self.intervals.hi, 0.0)
        out = np.where(right, self._d2_hi * d + self._d1_hi + self.tail.first(d), out)
        return out

    def second_derivative(self, t):
        t = self._check(t)
        out = self.base.second_derivative(self._inside(t))
        left, right = self._branches(t)
        out = np.where(left, self._d2_lo + self.tail.second(np.where(left, self.intervals.lo - t, 0.0)), out)
        out = np.where(right, self._d2_hi + self.tail.second(np.where(right, t - self.intervals.hi, 0.0)), out)
        return out

    def _curvature(self, lo, hi):
        # Outside Pi the curvature is the endpoint curvature plus r'' >= 0, so
        # the base bounds on Pi (widened by sup r'') hold on every sub-interval.
        return self.bounds.inf_hess.copy(), self.bounds.sup_hess + self.tail.sup_second

    def __repr__(self) -> str:
        return f"ExtrapolatedLoss(base={self.base.kind!r}, dim={self.dim}, tail={self.tail.kind!r})"


def build_extrapolated(loss: SmoothLoss, intervals: SimpleSet, tail: ExtrapolationTail = ZERO_TAIL) -> ExtrapolatedLoss:
    """
    Extend ``loss`` beyond ``intervals`` by endpoint Taylor polynomials plus ``tail``.

    Raises:
        InvariantError: on a degenerate interval lo_i = hi_i
        ConstructionError: if the loss cannot be differentiated at an endpoint
        UnboundedCurvatureError: if f_i'' is unbounded on an interval
    """
    extrapolated = ExtrapolatedLoss(loss, intervals, tail)
    logger.debug(f"Built {extrapolated!r} with gradient Lipschitz constant {extrapolated.lipschitz_constant}")
    return extrapolated


def extrapolated_lipschitz(loss: SmoothLoss, intervals: SimpleSet, tail: ExtrapolationTail = ZERO_TAIL) -> float:
    """max_i sup f_i'' over Pi_i, plus sup r''."""
    bounds = curvature_bounds(loss, intervals)
    unbounded = np.flatnonzero(~np.isfinite(bounds.sup_hess))
    if unbounded.size:
        i = int(unbounded[0])
        raise UnboundedCurvatureError(
            f"Coordinate {i}: second derivative is unbounded on [{bounds.lo[i]}, {bounds.hi[i]}]"
        )
    return float(np.max(bounds.sup_hess, initial=0.0)) + tail.sup_second


@dataclass(frozen=True, eq=False)
class ConvexityWeights:
    """Diagonal weights Lambda of the relative strong convexity of the loss."""
    diag: np.ndarray
    nonzero: bool

    @property
    def min_weight(self) -> float:
        return float(np.min(self.diag)) if self.diag.size else 0.0


def relative_strong_convexity_weights(loss: SmoothLoss, intervals: SimpleSet = None) -> ConvexityWeights:
    """
    Lambda_ii = inf of f_i'' over Pi_i.

    An all-zero Lambda is valid but leaves no room for a nonconvex penalty:
    any certified GME matrix then satisfies B L = 0.
    """
    bounds = curvature_bounds(loss, intervals)
    diag = np.array(bounds.inf_hess, dtype=float)
    diag.setflags(write=False)
    nonzero = bool(np.any(diag > 0))
    if not nonzero:
        logger.warning(f"All relative convexity weights of the {loss.kind} loss are zero; the model degenerates to the convex one")
    return ConvexityWeights(diag=diag, nonzero=nonzero)

