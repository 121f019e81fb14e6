import numpy as np
from django.test import SimpleTestCase, tag

from gme.solver import default_params, solve

from experiments.config import load_config
from experiments.services.scenarios import (
    NOISE_STREAM, RESULT_FIELDS, SIGNAL_STREAM, ExperimentService, best_mu_rows, summarize_trials, trial_seed,
)
from experiments.utils import signals


def small_poisson(**overrides):
    values = dict(n=24, trials=2, mu_grid=(0.5,), thetas=(0.0, 0.99), tol=1e-4, max_iter=20_000, workers=1)
    values.update(overrides)
    return load_config('poisson', **values)


def small_declip(**overrides):
    values = dict(
        n=32, sparsity=4, clip_levels=(0.4,), snrs=(10.0,), thetas=(0.0, 0.9), mu_grid=(5.0,),
        trials=1, tol=1e-3, max_iter=20_000, workers=1,
    )
    values.update(overrides)
    return load_config('declip', **values)


class TaskGridTests(SimpleTestCase):
    def test_poisson_grid_order(self):
        tasks = ExperimentService.poisson_tasks(small_poisson(mu_grid=(0.5, 1.0)))
        self.assertEqual(len(tasks), 2 * 2 * 2)
        self.assertEqual([t.index for t in tasks], list(range(8)))
        self.assertEqual((tasks[0].theta, tasks[0].mu, tasks[0].trial), (0.0, 0.5, 0))
        self.assertEqual((tasks[1].theta, tasks[1].mu, tasks[1].trial), (0.0, 0.5, 1))
        self.assertEqual(tasks[-1].theta, 0.99)

    def test_declip_grid_covers_cells(self):
        tasks = ExperimentService.declip_tasks(small_declip(clip_levels=(0.4, 0.6), snrs=(5.0, 10.0, 15.0)))
        self.assertEqual(len(tasks), 2 * 3 * 2)
        self.assertEqual({(t.clip_level, t.snr) for t in tasks}, {(c, s) for c in (0.4, 0.6) for s in (5.0, 10.0, 15.0)})

    def test_trial_seeds_separate_streams(self):
        config = small_poisson(seed=10)
        self.assertEqual(trial_seed(config, 3, NOISE_STREAM), (13, 1))
        self.assertNotEqual(trial_seed(config, 3, SIGNAL_STREAM), trial_seed(config, 3, NOISE_STREAM))


class ProblemBuilderTests(SimpleTestCase):
    def test_saturation_box(self):
        box = ExperimentService.saturation_box(np.array([0.4, 0.1, -0.4]), 0.4, 0.5)
        np.testing.assert_allclose(box.lo, [-0.1, -np.inf, -np.inf])
        np.testing.assert_allclose(box.hi, [np.inf, np.inf, 0.1])

    def test_poisson_problem_is_certified(self):
        config = small_poisson()
        y = np.array([12.0, 10.0, 9.0, 15.0, 30.0, 28.0, 31.0, 27.0])
        for theta in config.thetas:
            P = ExperimentService.build_poisson_problem(config, y, theta, 0.5)
            self.assertTrue(P.convexity_certified)
            self.assertEqual(P.existence.condition, 'iv')
            self.assertAlmostEqual(P.lipschitz_grad_f, 31.0 / 25.0)
        self.assertEqual(ExperimentService.build_poisson_problem(config, y, 0.0, 0.5).gme_matrix.kind, 'zero')

    def test_declip_problem_is_certified(self):
        config = small_declip()
        y = np.array([0.1, 0.4, -0.4, 0.0, 0.2, -0.1, 0.4, 0.3])
        P = ExperimentService.build_declip_problem(config, y, 0.4, 0.05, 0.9, 5.0)
        self.assertTrue(P.convexity_certified)
        self.assertAlmostEqual(P.convexity.min_eig, 0.0, delta=1e-9)
        np.testing.assert_allclose(P.weights[[0, 3]], [400.0, 400.0])
        self.assertEqual(P.weights[1], 0.0)

    def test_zero_count_falls_back_to_convex_model(self):
        config = small_poisson()
        y = np.array([12.0, 0.0, 9.0, 15.0, 30.0, 28.0])
        with self.assertLogs('experiments.services.scenarios', level='WARNING') as logs:
            P = ExperimentService.build_poisson_problem(config, y, 0.99, 0.5)
        self.assertEqual(P.gme_matrix.kind, 'zero')
        self.assertIn('falls back to the convex model', logs.output[0])

    def test_full_size_designs_are_certified(self):
        poisson = load_config('poisson', n=150)
        target = signals.gen_piecewise_constant(150, seed=(poisson.seed, SIGNAL_STREAM))
        y = signals.sample_poisson(target, seed=(poisson.seed, NOISE_STREAM))
        P = ExperimentService.build_poisson_problem(poisson, y, 0.99, 1.0)
        self.assertTrue(P.convexity_certified)
        self.assertLessEqual(P.convexity.tol, 1e-10)

        declip = load_config('declip', n=256)
        target = signals.gen_dct_sparse(256, declip.sparsity, seed=(declip.seed, SIGNAL_STREAM))
        s = signals.noise_scale_for_snr(target, 10.0)
        y = signals.clip_observe(target, 0.4, s, seed=(declip.seed, NOISE_STREAM))
        P = ExperimentService.build_declip_problem(declip, y, 0.4, s, 0.99, 5.0)
        self.assertTrue(P.convexity_certified)
        self.assertEqual(P.existence.condition, 'iii')


class SummaryTests(SimpleTestCase):
    def row(self, mu, ae, error=None):
        return {
            'scenario': 'poisson', 'clip_level': None, 'snr': None, 'theta': 0.0, 'mu': mu,
            'converged': error is None, 'error': error, 'ae': ae, 'se': ae, 'tv_count': 5, 'mse': None,
            'objective': 1.0,
        }

    def test_best_mu_by_mean_absolute_error(self):
        rows = [
            self.row(0.5, 2.0), self.row(0.5, 4.0),
            self.row(1.0, 1.0), self.row(1.0, 1.0),
            self.row(2.0, None, error='diverged'), self.row(2.0, 5.0),
        ]
        summary = summarize_trials(rows)
        self.assertEqual([s['mu'] for s in summary], [0.5, 1.0, 2.0])
        self.assertEqual(summary[0]['mean_ae'], 3.0)
        self.assertEqual(summary[2]['failed'], 1)
        self.assertEqual(summary[2]['mean_ae'], 5.0)
        self.assertEqual(summary[2]['converged_fraction'], 0.5)
        self.assertEqual([s['mu'] for s in best_mu_rows(summary)], [1.0])


@tag('slow')
class ExperimentRunTests(SimpleTestCase):
    def test_poisson_experiment(self):
        outcome = ExperimentService.run_poisson_experiment(small_poisson(), trace=True)
        self.assertEqual(len(outcome.rows), 4)
        for row in outcome.rows:
            self.assertIsNone(row['error'])
            self.assertTrue(set(row) <= set(RESULT_FIELDS))
        self.assertEqual([(r['theta'], r['trial']) for r in outcome.rows], [(0.0, 0), (0.0, 1), (0.99, 0), (0.99, 1)])
        self.assertEqual(len(outcome.trace_rows), outcome.rows[0]['iterations'])
        self.assertTrue(all(r['residual_P'] is not None for r in outcome.trace_rows))

    def test_results_do_not_depend_on_worker_count(self):
        serial = ExperimentService.run_poisson_experiment(small_poisson(workers=1)).rows
        parallel = ExperimentService.run_poisson_experiment(small_poisson(workers=3)).rows
        self.assertEqual(serial, parallel)

    def test_declip_experiment(self):
        outcome = ExperimentService.run_declip_experiment(small_declip())
        self.assertEqual(len(outcome.rows), 2)
        for row in outcome.rows:
            self.assertIsNone(row['error'])
            self.assertEqual(row['mse'], row['se'])
            self.assertGreater(row['noise_scale'], 0.0)
        self.assertEqual(outcome.trace_rows, [])


def best_by_theta(summary, metric):
    best = {}
    for row in best_mu_rows(summary):
        best[(row['clip_level'], row['snr'], row['theta'])] = row[metric]
    return best


@tag('slow')
class FullSizeTests(SimpleTestCase):
    def test_poisson_solve_converges_with_monotone_metric_residuals(self):
        config = load_config('poisson')
        target = signals.gen_piecewise_constant(config.n, seed=(config.seed, SIGNAL_STREAM))
        y = signals.sample_poisson(target, seed=(config.seed, NOISE_STREAM))
        P = ExperimentService.build_poisson_problem(config, y, 0.99, 1.0)
        result = solve(P, default_params(P, tol=1e-6, max_iter=1_000_000), metric_trace=True)
        self.assertTrue(result.converged)
        self.assertLess(result.final_residual, 1e-6)
        residuals = np.array(result.metric_residuals)
        self.assertTrue(np.all(residuals[1:] <= residuals[:-1] * (1 + 1e-9) + 1e-12))

    def test_gme_beats_convex_poisson_model(self):
        config = load_config('poisson', trials=20, workers=4)
        summary = summarize_trials(ExperimentService.run_poisson_experiment(config).rows)
        ae = best_by_theta(summary, 'mean_ae')
        self.assertLess(ae[(None, None, 0.99)], ae[(None, None, 0.0)])
        best_se = {
            theta: min(s['mean_se'] for s in summary if s['theta'] == theta) for theta in config.thetas
        }
        self.assertLess(best_se[0.99], best_se[0.0])
        tv = best_by_theta(summary, 'mean_tv_count')
        self.assertLessEqual(tv[(None, None, 0.99)], tv[(None, None, 0.0)])

    def test_gme_beats_convex_declip_model_in_every_cell(self):
        config = load_config('declip', trials=3, workers=4)
        summary = summarize_trials(ExperimentService.run_declip_experiment(config).rows)
        mse = best_by_theta(summary, 'mean_mse')
        for clip_level in config.clip_levels:
            for snr in config.snrs:
                self.assertLessEqual(mse[(clip_level, snr, 0.99)], mse[(clip_level, snr, 0.0)])
