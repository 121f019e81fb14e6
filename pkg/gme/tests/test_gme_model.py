import math

import numpy as np
from django.test import SimpleTestCase

from gme import linops
from gme.exceptions import DesignError, InputError, ParameterError
from gme.extrapolate import build_extrapolated, relative_strong_convexity_weights
from gme.gme_model import (
    assemble_problem, certify, check_existence, check_overall_convexity, convexity_matrix,
    decompose_objective, design_B_inverse, design_B_scalar, evaluate_objective,
)
from gme.losses import clipped_loss, poisson_loss, quadratic_loss
from gme.proxfns import intervals, l1_norm


def denoising_problem(y, gme_matrix=None, analysis=None, **kwargs):
    y = np.asarray(y, dtype=float)
    n = y.size
    return assemble_problem(
        loss=quadratic_loss(y), forward=linops.identity(n), mu=kwargs.pop('mu', 1.0),
        psi=l1_norm(), analysis=analysis or linops.identity(n), gme_matrix=gme_matrix, **kwargs,
    )


class AssembleTests(SimpleTestCase):
    def test_defaults(self):
        P = denoising_problem([1.0, 2.0, 3.0])
        self.assertEqual(P.dim, 3)
        self.assertEqual(P.gme_matrix.kind, 'zero')
        self.assertEqual(P.constraint_map.kind, 'identity')
        self.assertTrue(P.constraint_set.is_whole_space)
        np.testing.assert_array_equal(P.weights, [1.0, 1.0, 1.0])
        self.assertEqual(P.lipschitz_grad_f, 1.0)
        self.assertFalse(P.convexity_certified)

    def test_mu_must_be_positive(self):
        with self.assertRaises(ParameterError):
            denoising_problem([1.0], mu=0.0)

    def test_dimension_mismatch(self):
        with self.assertRaises(InputError):
            denoising_problem([1.0, 2.0], analysis=linops.identity(3))
        with self.assertRaises(InputError):
            denoising_problem([1.0, 2.0], gme_matrix=linops.identity(3))

    def test_loss_without_global_lipschitz_constant(self):
        with self.assertRaises(ParameterError):
            assemble_problem(
                loss=poisson_loss([4.0]), forward=linops.identity(1), mu=1.0, psi=l1_norm(),
                analysis=linops.identity(1), weights=[0.0],
            )


class ConvexityTests(SimpleTestCase):
    def test_convex_model_is_certified(self):
        cert = check_overall_convexity(denoising_problem([1.0, 2.0]))
        self.assertTrue(cert.holds)
        self.assertAlmostEqual(cert.min_eig, 1.0)

    def test_oversized_gme_matrix_fails(self):
        P = denoising_problem([1.0, 2.0], gme_matrix=linops.scaled(linops.identity(2), 2.0))
        np.testing.assert_allclose(convexity_matrix(P), -3.0 * np.eye(2))
        with self.assertLogs('gme.gme_model', level='WARNING'):
            certified = certify(P)
        self.assertFalse(certified.convexity_certified)
        self.assertAlmostEqual(certified.convexity.min_eig, -3.0)

    def test_certify_returns_a_copy(self):
        P = denoising_problem([1.0, 2.0])
        certified = certify(P)
        self.assertIsNone(P.convexity)
        self.assertTrue(certified.convexity_certified)
        self.assertEqual(certified.existence.condition, 'iii')


class InverseDesignTests(SimpleTestCase):
    def test_convexity_matrix_is_scaled_weights(self):
        rng = np.random.default_rng(0)
        n = 30
        weights = rng.uniform(0.1, 2.0, n)
        analysis = linops.dct(n)
        for theta in (0.0, 0.5, 0.99):
            for mu in (0.2, 3.0):
                B = design_B_inverse(theta, mu, weights, analysis, forward=linops.identity(n))
                P = assemble_problem(
                    loss=quadratic_loss(np.zeros(n)), forward=linops.identity(n), mu=mu,
                    psi=l1_norm(), analysis=analysis, gme_matrix=B, weights=weights,
                )
                np.testing.assert_allclose(convexity_matrix(P), (1 - theta) * np.diag(weights), atol=1e-10)
                cert = check_overall_convexity(P)
                self.assertTrue(cert.holds)
                self.assertAlmostEqual(cert.min_eig, (1 - theta) * weights.min(), delta=1e-10)

    def test_zero_theta_gives_zero_matrix(self):
        B = design_B_inverse(0.0, 1.0, np.ones(4), linops.dct(4))
        self.assertEqual(B.kind, 'zero')

    def test_requires_identity_forward(self):
        with self.assertRaises(DesignError):
            design_B_inverse(0.5, 1.0, np.ones(4), linops.dct(4), forward=linops.diagonal([1, 2, 3, 4]))

    def test_requires_invertible_analysis(self):
        with self.assertRaises(DesignError):
            design_B_inverse(0.5, 1.0, np.ones(4), linops.diagonal([1.0, 0.0, 1.0, 1.0]))

    def test_theta_range(self):
        with self.assertRaises(ParameterError):
            design_B_inverse(1.0, 1.0, np.ones(4), linops.dct(4))


class ScalarDesignTests(SimpleTestCase):
    def test_largest_scalar_for_uniform_weights(self):
        n, theta, mu = 5, 0.9, 2.0
        D = linops.first_difference(n)
        B = design_B_scalar(theta, mu, np.ones(n), linops.identity(n), D)
        c_star = 1.0 / linops.operator_norm(D) ** 2
        self.assertEqual(B.kind, 'scaled')
        self.assertAlmostEqual(B.scale, math.sqrt(theta * c_star / mu), places=8)

        P = assemble_problem(
            loss=quadratic_loss(np.zeros(n)), forward=linops.identity(n), mu=mu,
            psi=l1_norm(), analysis=D, gme_matrix=B,
        )
        self.assertTrue(check_overall_convexity(P).holds)

    def test_zero_weight_degenerates_to_convex_model(self):
        with self.assertLogs('gme.gme_model', level='WARNING'):
            B = design_B_scalar(0.99, 1.0, [0.0, 1.0, 1.0], linops.identity(3), linops.first_difference(3))
        self.assertEqual(B.kind, 'zero')
        self.assertEqual(B.shape, (2, 2))


class ExistenceTests(SimpleTestCase):
    def test_bounded_constraint_with_injective_map(self):
        P = denoising_problem([1.0, 2.0], constraint_set=intervals(0.0, 1.0, dim=2))
        self.assertEqual(check_existence(P).condition, 'iv')

    def test_bounded_below_with_injective_analysis(self):
        P = denoising_problem([1.0, 2.0, 3.0], analysis=linops.dct(3))
        self.assertEqual(check_existence(P).condition, 'iii')

    def test_coercive_with_trivial_joint_null_space(self):
        P = denoising_problem([1.0, 2.0, 3.0], analysis=linops.first_difference(3))
        self.assertEqual(check_existence(P).condition, 'ii')

    def test_coercive_over_interval_product(self):
        P = assemble_problem(
            loss=quadratic_loss([0.0]), forward=linops.zero(3, 1), mu=1.0, psi=l1_norm(),
            analysis=linops.first_difference(3),
        )
        self.assertEqual(check_existence(P).condition, 'i')

    def test_nothing_certified(self):
        loss = clipped_loss([0.1, 0.4, -0.4], clip_level=0.4, noise_scale=0.5)
        P = assemble_problem(
            loss=loss, forward=linops.identity(3), mu=1.0, psi=l1_norm(),
            analysis=linops.first_difference(3),
        )
        cert = check_existence(P)
        self.assertEqual(cert.condition, 'none')
        self.assertFalse(cert.certified)

    def test_declared_properties_override_loss(self):
        P = denoising_problem([1.0, 2.0, 3.0], analysis=linops.dct(3))
        self.assertEqual(check_existence(P, {'f_coercive': False, 'f_bounded_below': False}).condition, 'none')


class ObjectiveTests(SimpleTestCase):
    def setUp(self):
        self.P = denoising_problem(
            [0.0, 0.0, 0.0], gme_matrix=linops.identity(3), constraint_set=intervals(-5.0, 5.0, dim=3),
        )
        self.x = np.array([3.0, 0.5, -2.0])

    def test_evaluate(self):
        value = evaluate_objective(self.P, self.x)
        self.assertAlmostEqual(value.fidelity, 6.625)
        self.assertAlmostEqual(value.regularizer, 1.375)
        self.assertAlmostEqual(value.total, 8.0)
        self.assertTrue(value.feasible)
        self.assertFalse(evaluate_objective(self.P, np.array([6.0, 0.0, 0.0])).feasible)

    def test_decomposition_sums_to_cost(self):
        parts = decompose_objective(self.P, self.x)
        self.assertAlmostEqual(parts.smooth, 0.0)
        self.assertAlmostEqual(parts.convex_reg, 5.5)
        self.assertAlmostEqual(parts.conjugate, 2.5)
        self.assertAlmostEqual(parts.total, evaluate_objective(self.P, self.x).total)

    def test_point_is_checked(self):
        with self.assertRaises(InputError):
            evaluate_objective(self.P, np.ones(2))
        with self.assertRaises(InputError):
            evaluate_objective(self.P, np.array([1.0, math.inf, 0.0]))


class SegmentConvexityTests(SimpleTestCase):
    def assert_convex_along_segments(self, P, sample, pairs=100):
        rng = np.random.default_rng(5)
        for _ in range(pairs):
            x, x2, lam = sample(rng), sample(rng), rng.uniform()
            mid = evaluate_objective(P, lam * x + (1 - lam) * x2).total
            chord = lam * evaluate_objective(P, x).total + (1 - lam) * evaluate_objective(P, x2).total
            self.assertLessEqual(mid, chord + 1e-9 * (1.0 + abs(chord)))

    def test_denoising_with_nonconvex_penalty(self):
        y = np.array([3.0, 1.5, 0.5, -1.2])
        B = design_B_inverse(0.9, 1.0, np.ones(4), linops.identity(4), linops.identity(4))
        P = certify(assemble_problem(
            loss=quadratic_loss(y), forward=linops.identity(4), mu=1.0, psi=l1_norm(),
            analysis=linops.identity(4), gme_matrix=B,
        ))
        self.assertTrue(P.convexity_certified)
        self.assert_convex_along_segments(P, lambda rng: rng.uniform(-4.0, 4.0, 4))

    def test_poisson_total_variation(self):
        y = np.array([8.0, 11.0, 9.0, 24.0, 27.0, 22.0])
        box = intervals(5.0, 40.0, dim=6)
        base = poisson_loss(y)
        weights = relative_strong_convexity_weights(base, box)
        D = linops.first_difference(6)
        P = certify(assemble_problem(
            loss=build_extrapolated(base, box), forward=linops.identity(6), mu=2.0, psi=l1_norm(),
            analysis=D, gme_matrix=design_B_scalar(0.99, 2.0, weights, linops.identity(6), D),
            weights=weights, constraint_set=box,
        ))
        self.assertTrue(P.convexity_certified)
        self.assertNotEqual(P.gme_matrix.kind, 'zero')
        self.assert_convex_along_segments(P, lambda rng: rng.uniform(5.0, 40.0, 6))
