import math

import numpy as np
from django.test import SimpleTestCase

from gme.exceptions import ConstructionError, InputError, InvariantError, UnboundedCurvatureError
from gme.extrapolate import (
    CUBIC_QUADRATIC_TAIL, ExtrapolationTail, build_extrapolated, extrapolated_lipschitz,
    relative_strong_convexity_weights,
)
from gme.losses import SmoothLoss, clipped_loss, curvature_bounds, poisson_loss, quadratic_loss
from gme.proxfns import intervals


class SteepLoss(SmoothLoss):
    """t^4 / 12 per coordinate; its curvature is unbounded on a half-line."""
    kind = 'steep'

    def values(self, t):
        return self._check(t) ** 4 / 12.0

    def derivative(self, t):
        return self._check(t) ** 3 / 3.0

    def second_derivative(self, t):
        return self._check(t) ** 2

    def _curvature(self, lo, hi):
        lo_sq, hi_sq = lo ** 2, hi ** 2
        inside = (lo <= 0) & (hi >= 0)
        return np.where(inside, 0.0, np.minimum(lo_sq, hi_sq)), np.maximum(lo_sq, hi_sq)


class TailTests(SimpleTestCase):
    def test_zero_tail(self):
        tail = ExtrapolationTail()
        self.assertEqual(tail.sup_second, 0.0)
        np.testing.assert_array_equal(tail.value([0.0, 3.0]), [0.0, 0.0])

    def test_cubic_quadratic_tail_is_twice_continuous(self):
        tail = CUBIC_QUADRATIC_TAIL
        eps = 1e-9
        for fn in (tail.value, tail.first, tail.second):
            self.assertAlmostEqual(float(fn(1.0 - eps)), float(fn(1.0 + eps)), places=7)
            self.assertEqual(float(fn(0.0)), 0.0)
        self.assertAlmostEqual(float(tail.value(2.0)), 2.0 - 1.0 + 1.0 / 6.0)
        self.assertEqual(tail.sup_second, 1.0)

    def test_unknown_kind_rejected(self):
        with self.assertRaises(InputError):
            ExtrapolationTail('quartic')


class ExtrapolatedPoissonTests(SimpleTestCase):
    def setUp(self):
        self.base = poisson_loss([4.0, 9.0])
        self.box = intervals(5.0, 40.0, dim=2)
        self.loss = build_extrapolated(self.base, self.box)

    def test_lipschitz_constant(self):
        self.assertAlmostEqual(self.loss.lipschitz_constant, 0.36)
        self.assertAlmostEqual(extrapolated_lipschitz(self.base, self.box), 0.36)

    def test_agrees_with_base_inside(self):
        for t in ([5.0, 40.0], [7.5, 20.0], [39.0, 5.5]):
            np.testing.assert_allclose(self.loss.values(t), self.base.values(t), rtol=1e-14)
            np.testing.assert_allclose(self.loss.derivative(t), self.base.derivative(t), rtol=1e-14)

    def test_left_branch_is_endpoint_taylor_polynomial(self):
        value = self.loss.values([1.0, 5.0])[0]
        f5 = 5.0 - 4.0 * math.log(5.0)
        self.assertAlmostEqual(value, 0.5 * 0.16 * 16.0 + 0.2 * -4.0 + f5)
        self.assertAlmostEqual(self.loss.second_derivative([1.0, 5.0])[0], 0.16)

    def test_defined_on_whole_space(self):
        t = np.array([-50.0, 500.0])
        self.assertTrue(np.all(np.isfinite(self.loss.values(t))))
        self.assertTrue(np.all(np.isfinite(self.loss.derivative(t))))

    def test_continuous_across_endpoints(self):
        eps = 1e-9
        for endpoint in (5.0, 40.0):
            below = np.full(2, endpoint - eps)
            above = np.full(2, endpoint + eps)
            for fn in (self.loss.values, self.loss.derivative, self.loss.second_derivative):
                np.testing.assert_allclose(fn(below), fn(above), rtol=1e-6, atol=1e-9)

    def test_gradient_is_lipschitz(self):
        rng = np.random.default_rng(0)
        L = self.loss.lipschitz_constant
        for _ in range(200):
            a, b = rng.uniform(-100, 100, 2), rng.uniform(-100, 100, 2)
            gap = np.abs(self.loss.derivative(a) - self.loss.derivative(b))
            self.assertTrue(np.all(gap <= L * np.abs(a - b) * (1 + 1e-10) + 1e-12))

    def test_convexity_weights(self):
        weights = relative_strong_convexity_weights(self.base, self.box)
        np.testing.assert_allclose(weights.diag, [4.0 / 1600, 9.0 / 1600])
        self.assertTrue(weights.nonzero)
        self.assertAlmostEqual(weights.min_weight, 4.0 / 1600)

    def test_cubic_quadratic_tail_adds_curvature(self):
        loss = build_extrapolated(self.base, self.box, CUBIC_QUADRATIC_TAIL)
        self.assertAlmostEqual(loss.lipschitz_constant, 1.36)
        self.assertTrue(loss.coercive)
        plain = self.loss.values([-10.0, 100.0])
        with_tail = loss.values([-10.0, 100.0])
        self.assertTrue(np.all(with_tail > plain))


CLIP, SCALE, MARGIN = 0.4, 0.05, 0.5


class ExtrapolatedClippedTests(SimpleTestCase):
    """Clipped loss on the saturation box: junctions at CLIP - MARGIN and -CLIP + MARGIN."""

    def setUp(self):
        self.base = clipped_loss([CLIP, -CLIP, 0.1], clip_level=CLIP, noise_scale=SCALE)
        self.box = intervals([CLIP - MARGIN, -np.inf, -np.inf], [np.inf, -CLIP + MARGIN, np.inf])
        self.loss = build_extrapolated(self.base, self.box)
        self.junctions = ((0, CLIP - MARGIN), (1, -CLIP + MARGIN))

    def point(self, i, t):
        x = np.full(3, 0.1)
        x[i] = t
        return x

    def test_branches_agree_to_second_order_at_junctions(self):
        for i, j in self.junctions:
            for h in (-1e-6, 1e-6):
                x = self.point(i, j + h)
                self.assertAlmostEqual(self.loss.values(x)[i], self.base.values(x)[i], delta=1e-8)
                self.assertAlmostEqual(self.loss.derivative(x)[i], self.base.derivative(x)[i], delta=1e-6)
                np.testing.assert_allclose(
                    self.loss.second_derivative(x)[i], self.base.second_derivative(x)[i], rtol=1e-4,
                )

    def test_second_difference_matches_curvature_at_junctions(self):
        h = 1e-4
        for i, j in self.junctions:
            f = [self.loss.values(self.point(i, j + k * h))[i] for k in (-1, 0, 1)]
            quotient = (f[0] - 2.0 * f[1] + f[2]) / h ** 2
            np.testing.assert_allclose(quotient, self.loss.second_derivative(self.point(i, j))[i], rtol=1e-4)

    def test_curvature_is_monotone_on_clipped_samples(self):
        grid = np.linspace(CLIP - MARGIN, CLIP + 0.2, 2000)
        upper = clipped_loss(np.full(grid.size, CLIP), clip_level=CLIP, noise_scale=SCALE)
        self.assertTrue(np.all(np.diff(upper.second_derivative(grid)) < 0))
        lower = clipped_loss(np.full(grid.size, -CLIP), clip_level=CLIP, noise_scale=SCALE)
        self.assertTrue(np.all(np.diff(lower.second_derivative(-grid)) < 0))

    def test_curvature_bounds_match_grid_extremes(self):
        bounds = curvature_bounds(self.base, self.box)
        grid = np.linspace(CLIP - MARGIN, CLIP + 0.2, 2000)
        upper = clipped_loss(np.full(grid.size, CLIP), clip_level=CLIP, noise_scale=SCALE)
        curvature = upper.second_derivative(grid)
        self.assertAlmostEqual(float(np.max(curvature)), bounds.sup_hess[0], delta=1e-9 * bounds.sup_hess[0])
        self.assertAlmostEqual(bounds.sup_hess[1], bounds.sup_hess[0], delta=1e-9 * bounds.sup_hess[0])
        self.assertLess(bounds.sup_hess[0], 1.0 / SCALE ** 2)
        self.assertAlmostEqual(bounds.sup_hess[2], 1.0 / SCALE ** 2)
        self.assertEqual(bounds.inf_hess[0], 0.0)
        self.assertAlmostEqual(self.loss.lipschitz_constant, 1.0 / SCALE ** 2)

    def test_infinite_endpoints_evaluate_cleanly(self):
        x = np.array([-1.0, 1.0, 0.3])
        with np.errstate(invalid='raise'):
            values = self.loss.values(x)
            slopes = self.loss.derivative(x)
            curvature = self.loss.second_derivative(x)
        for out in (values, slopes, curvature):
            self.assertTrue(np.all(np.isfinite(out)))
        self.assertAlmostEqual(values[2], self.base.values(x)[2])


class ExtrapolationEdgeTests(SimpleTestCase):
    def test_half_infinite_interval_keeps_base_branch(self):
        base = quadratic_loss([1.0])
        loss = build_extrapolated(base, intervals(-np.inf, 2.0, dim=1))
        for t in (-100.0, 0.0, 100.0):
            self.assertAlmostEqual(loss.value([t]), base.value([t]))

    def test_degenerate_interval_rejected(self):
        with self.assertRaises(InvariantError):
            build_extrapolated(quadratic_loss([1.0]), intervals(2.0, 2.0, dim=1))

    def test_endpoint_outside_domain_is_a_construction_error(self):
        with self.assertRaises(ConstructionError):
            build_extrapolated(poisson_loss([4.0]), intervals(0.0, 10.0, dim=1))

    def test_unbounded_curvature(self):
        with self.assertRaises(UnboundedCurvatureError):
            extrapolated_lipschitz(SteepLoss([0.0]), intervals(1.0, np.inf, dim=1))
        with self.assertRaises(UnboundedCurvatureError):
            build_extrapolated(SteepLoss([0.0]), intervals(1.0, np.inf, dim=1))

    def test_all_zero_weights_warn(self):
        with self.assertLogs('gme.extrapolate', level='WARNING'):
            weights = relative_strong_convexity_weights(poisson_loss([0.0, 0.0]), intervals(5.0, 40.0, dim=2))
        self.assertFalse(weights.nonzero)

    def test_clipped_weights_vanish_on_clipped_samples(self):
        loss = clipped_loss([0.1, 0.4, -0.4], clip_level=0.4, noise_scale=0.5)
        weights = relative_strong_convexity_weights(loss)
        np.testing.assert_array_equal(weights.diag, [4.0, 0.0, 0.0])
