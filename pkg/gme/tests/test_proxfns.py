import math

import numpy as np
from django.test import SimpleTestCase

from gme import linops
from gme.exceptions import ConvergenceError, InputError, InvariantError, ParameterError
from gme.proxfns import (
    custom_set, envelope_minimum, gme_value, indicator, intervals, l1_norm,
    prox_conjugate, prox_l1, whole_space,
)


class SoftThresholdTests(SimpleTestCase):
    def test_known_values(self):
        np.testing.assert_array_equal(prox_l1([3.0, -0.5], 1.0), [2.0, 0.0])
        np.testing.assert_array_equal(prox_l1([-3.0, 0.25, 1.0], 0.5), [-2.5, 0.0, 0.5])

    def test_scale_must_be_positive(self):
        with self.assertRaises(ParameterError):
            prox_l1([1.0], 0.0)

    def test_prox_is_minimizer(self):
        # prox minimizes |v|_1 + |v - x|^2 / (2 gamma); compare against perturbations
        rng = np.random.default_rng(0)
        x = rng.standard_normal(5) * 3
        gamma = 0.7
        p = prox_l1(x, gamma)

        def objective(v):
            return np.sum(np.abs(v)) + np.sum((v - x) ** 2) / (2 * gamma)

        for _ in range(50):
            self.assertLessEqual(objective(p), objective(p + 1e-3 * rng.standard_normal(5)) + 1e-12)


class ConjugateTests(SimpleTestCase):
    def test_l1_conjugate_is_clipping(self):
        F = l1_norm()
        np.testing.assert_allclose(prox_conjugate(F, [0.4, -5.0]), [0.4, -1.0])
        np.testing.assert_allclose(prox_conjugate(F, [0.4, -5.0], gamma=2.0), [0.4, -1.0])

    def test_moreau_identity(self):
        F = l1_norm()
        x = np.random.default_rng(1).standard_normal(6) * 2
        np.testing.assert_allclose(F.prox(x, 1.0) + prox_conjugate(F, x), x, atol=1e-15)


class SimpleSetTests(SimpleTestCase):
    def test_projection_clips(self):
        S = intervals([0.0, -1.0], [1.0, 1.0])
        np.testing.assert_array_equal(S.project([2.0, -3.0]), [1.0, -1.0])
        self.assertTrue(S.is_bounded)
        self.assertFalse(S.is_whole_space)

    def test_scalar_bounds_broadcast(self):
        S = intervals(5.0, 40.0, dim=3)
        np.testing.assert_array_equal(S.lo, [5.0, 5.0, 5.0])
        self.assertTrue(S.contains([5.0, 20.0, 40.0]))
        self.assertFalse(S.contains([4.99, 20.0, 40.0]))
        self.assertTrue(S.contains([4.99, 20.0, 40.0], tol=0.02))

    def test_whole_space(self):
        S = whole_space(4)
        self.assertTrue(S.is_whole_space)
        self.assertFalse(S.is_bounded)
        u = np.array([1e300, -1e300, 0.0, 2.0])
        np.testing.assert_array_equal(S.project(u), u)

    def test_inverted_interval_rejected(self):
        with self.assertRaises(InvariantError):
            intervals([1.0], [0.0])

    def test_dimension_checked(self):
        with self.assertRaises(InputError):
            intervals(0.0, 1.0, dim=3).project(np.ones(2))

    def test_custom_projector(self):
        def unit_ball(u):
            norm = np.linalg.norm(u)
            return u if norm <= 1 else u / norm

        S = custom_set(2, unit_ball)
        self.assertFalse(S.is_intervals)
        np.testing.assert_allclose(S.project(np.array([3.0, 4.0])), [0.6, 0.8])
        self.assertTrue(S.contains(np.array([0.6, 0.8]), tol=1e-12))
        self.assertFalse(S.contains(np.array([3.0, 4.0]), tol=1e-6))

    def test_indicator(self):
        box = indicator(intervals(0.0, 1.0, dim=2))
        self.assertEqual(box.kind, 'box')
        self.assertEqual(box.value(np.array([0.5, 1.0])), 0.0)
        self.assertEqual(box.value(np.array([0.5, 1.5])), math.inf)
        np.testing.assert_array_equal(box.prox(np.array([-2.0, 0.3]), 7.0), [0.0, 0.3])
        half = indicator(intervals(0.0, np.inf, dim=2))
        self.assertEqual(half.kind, 'product_intervals')
        self.assertFalse(half.coercive)


class GmeValueTests(SimpleTestCase):
    def test_identity_matrix_gives_minimax_concave_penalty(self):
        # B = I: |t| - t^2/2 for |t| <= 1, 1/2 beyond
        z = np.array([3.0, 0.5, -2.0])
        self.assertAlmostEqual(gme_value(l1_norm(), linops.identity(3), z), 1.375, places=12)

    def test_zero_matrix_gives_psi(self):
        z = np.array([3.0, 0.5, -2.0])
        self.assertEqual(gme_value(l1_norm(), linops.zero(3), z), 5.5)

    def test_value_lies_between_zero_and_psi(self):
        rng = np.random.default_rng(2)
        B = linops.diagonal([1.0, 0.5, 2.0, 0.1])
        psi = l1_norm()
        for _ in range(10):
            z = rng.standard_normal(4) * 3
            value = gme_value(psi, B, z)
            self.assertGreaterEqual(value, 0.0)
            self.assertLessEqual(value, psi.value(z) + 1e-12)

    def test_inexact_minimization_reports_best_value(self):
        z = np.array([3.0, 0.5, -2.0])
        with self.assertRaises(ConvergenceError) as ctx:
            envelope_minimum(l1_norm(), linops.identity(3), z, max_iter=1)
        self.assertAlmostEqual(ctx.exception.last_value, 4.125)
        with self.assertRaises(ConvergenceError) as ctx:
            gme_value(l1_norm(), linops.identity(3), z, max_iter=1)
        self.assertAlmostEqual(ctx.exception.last_value, 1.375)
