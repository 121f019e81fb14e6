"""
Experiment Scenarios
====================

Runs the two reconstruction experiments over (cell, theta, mu, trial) grids:

- Poisson denoising of a piecewise-constant signal with a TV-type analysis
  operator, Delta = [lo, hi]^n and a scalar-designed GME matrix
- Simultaneous declipping and Gaussian denoising of a DCT-sparse signal,
  with saturation-consistency constraints and an inverse-designed GME matrix

theta = 0 always yields B = 0, i.e. the convex baseline model. Every
trial rebuilds and certifies its own problem because the weights depend on
the observation. Trials run on a thread pool; rows come back in task order, so output does
not depend on scheduling.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import groupby
from typing import List, Optional, Tuple
import logging
import math

import numpy as np

from gme import linops
from gme.exceptions import ConvergenceError, DesignError, GmeError
from gme.extrapolate import ExtrapolationTail, build_extrapolated, relative_strong_convexity_weights
from gme.gme_model import GmeProblem, assemble_problem, certify, design_B_inverse, design_B_scalar, evaluate_objective
from gme.losses import clipped_loss, poisson_loss
from gme.proxfns import intervals, l1_norm
from gme.solver import SolveResult, default_params, solve

from experiments.config import ScenarioConfig
from experiments.utils import metrics, signals

logger = logging.getLogger(__name__)

SIGNAL_STREAM = 0
NOISE_STREAM = 1

RESULT_FIELDS = (
    'scenario', 'clip_level', 'snr', 'noise_scale', 'theta', 'mu', 'trial',
    'converged', 'iterations', 'residual', 'ae', 'se', 'tv_count', 'mse',
    'objective', 'feasible', 'error',
)

SUMMARY_FIELDS = (
    'scenario', 'clip_level', 'snr', 'theta', 'mu', 'trials', 'failed', 'converged_fraction',
    'mean_ae', 'mean_se', 'mean_tv_count', 'mean_mse', 'mean_objective', 'best_mu',
)

PRIMARY_METRIC = {'poisson': 'mean_ae', 'declip': 'mean_mse'}


@dataclass(frozen=True)
class Task:
    """One solve: a scenario cell, a (theta, mu) pair and a trial index."""
    index: int
    theta: float
    mu: float
    trial: int
    clip_level: Optional[float] = None
    snr: Optional[float] = None


@dataclass
class ExperimentOutcome:
    rows: List[dict]
    trace_rows: List[dict] = field(default_factory=list)


def trial_seed(config: ScenarioConfig, trial: int, stream: int) -> Tuple[int, int]:
    """Seed entropy for one stream of one trial (base_seed + trial)."""
    return (config.seed + trial, stream)


def _solve_and_measure(
    problem: GmeProblem,
    config: ScenarioConfig,
    target: np.ndarray,
    row: dict,
    keep_trace: bool,
) -> Tuple[dict, np.ndarray, Optional[SolveResult]]:
    if not problem.convexity_certified:
        raise DesignError(f"Designed problem fails the overall convexity check (min_eig={problem.convexity.min_eig:.3e})")
    params = default_params(problem, tol=config.tol, max_iter=config.max_iter)
    result = solve(
        problem, params, trace_every=config.trace_every if keep_trace else 0, metric_trace=keep_trace,
    )
    x = result.x
    try:
        value = evaluate_objective(problem, x)
        objective, feasible = value.total, value.feasible
    except ConvergenceError as exc:
        logger.warning(f"Objective of trial {row['trial']} uses an inexact GME value: {exc}")
        objective = problem.loss.value(problem.forward.apply(x)) + problem.mu * exc.last_value
        feasible = problem.constraint_set.contains(problem.constraint_map.apply(x), tol=1e-9)

    row.update(
        converged=result.converged, iterations=result.iterations, residual=result.final_residual,
        ae=metrics.absolute_error(x, target), se=metrics.squared_error(x, target),
        objective=objective, feasible=feasible,
    )
    return row, x, (result if keep_trace else None)


class ExperimentService:
    """
    Builds per-trial problems for each scenario and runs the task grid.

    Scenario rules:
    - poisson: Pi = Delta = [box_lo, box_hi]^n, L = first difference,
      B = scalar design (theta, mu)
    - declip: A = C = identity, Pi = Delta = saturation-consistency box with
      margin = margin_factor * s, L = orthonormal DCT, B = inverse design
    """

    # ------------------------------------------------------------------
    # Problem builders
    # ------------------------------------------------------------------

    @staticmethod
    def build_poisson_problem(config: ScenarioConfig, y: np.ndarray, theta: float, mu: float) -> GmeProblem:
        n = y.size
        box = intervals(config.box_lo, config.box_hi, n)
        base = poisson_loss(y)
        loss = build_extrapolated(base, box, ExtrapolationTail(config.tail))
        weights = relative_strong_convexity_weights(base, box)
        forward, analysis = linops.identity(n), linops.first_difference(n)
        B = design_B_scalar(theta, mu, weights, forward, analysis)
        if theta > 0 and B.kind == 'zero':
            zeros = int(np.count_nonzero(y == 0))
            logger.warning(
                f"Poisson problem at mu={mu} falls back to the convex model (theta={theta} requested, {zeros} zero counts)"
            )
        problem = assemble_problem(
            loss=loss, forward=forward, mu=mu, psi=l1_norm(), analysis=analysis, gme_matrix=B,
            constraint_map=linops.identity(n), constraint_set=box, weights=weights,
        )
        return certify(problem)

    @staticmethod
    def saturation_box(y: np.ndarray, clip_level: float, margin: float):
        """R on unclipped samples, [c - margin, inf) on y = c, (-inf, -c + margin] on y = -c."""
        lo = np.where(y == clip_level, clip_level - margin, -np.inf)
        hi = np.where(y == -clip_level, -clip_level + margin, np.inf)
        return intervals(lo, hi)

    @classmethod
    def build_declip_problem(
        cls, config: ScenarioConfig, y: np.ndarray, clip_level: float, noise_scale: float,
        theta: float, mu: float,
    ) -> GmeProblem:
        n = y.size
        box = cls.saturation_box(y, clip_level, config.margin_factor * noise_scale)
        base = clipped_loss(y, clip_level, noise_scale)
        loss = build_extrapolated(base, box, ExtrapolationTail(config.tail))
        weights = relative_strong_convexity_weights(base, box)
        forward, analysis = linops.identity(n), linops.dct(n)
        B = design_B_inverse(theta, mu, weights, analysis, forward)
        problem = assemble_problem(
            loss=loss, forward=forward, mu=mu, psi=l1_norm(), analysis=analysis, gme_matrix=B,
            constraint_map=forward, constraint_set=box, weights=weights,
        )
        return certify(problem)

    # ------------------------------------------------------------------
    # Task grids
    # ------------------------------------------------------------------

    @staticmethod
    def poisson_tasks(config: ScenarioConfig) -> List[Task]:
        tasks = []
        for theta in config.thetas:
            for mu in config.mu_grid:
                for trial in range(config.trials):
                    tasks.append(Task(index=len(tasks), theta=theta, mu=mu, trial=trial))
        return tasks

    @staticmethod
    def declip_tasks(config: ScenarioConfig) -> List[Task]:
        tasks = []
        for clip_level in config.clip_levels:
            for snr in config.snrs:
                for theta in config.thetas:
                    for mu in config.mu_grid:
                        for trial in range(config.trials):
                            tasks.append(Task(
                                index=len(tasks), theta=theta, mu=mu, trial=trial,
                                clip_level=clip_level, snr=snr,
                            ))
        return tasks

    # ------------------------------------------------------------------
    # Trials
    # ------------------------------------------------------------------

    @staticmethod
    def _base_row(config: ScenarioConfig, task: Task) -> dict:
        return {
            'scenario': config.scenario, 'clip_level': task.clip_level, 'snr': task.snr,
            'theta': task.theta, 'mu': task.mu, 'trial': task.trial,
            'converged': False, 'error': None,
        }

    @classmethod
    def run_poisson_trial(cls, config: ScenarioConfig, target: np.ndarray, task: Task, keep_trace: bool = False):
        row = cls._base_row(config, task)
        try:
            y = signals.sample_poisson(target, seed=trial_seed(config, task.trial, NOISE_STREAM))
            problem = cls.build_poisson_problem(config, y, task.theta, task.mu)
            row, x, result = _solve_and_measure(problem, config, target, row, keep_trace)
            row['tv_count'] = metrics.tv_support_count(x)
        except (GmeError, ArithmeticError, ValueError) as exc:
            logger.error(f"Poisson task {task} failed: {exc}", exc_info=True)
            row['error'] = str(exc)
            return row, None
        return row, result

    @classmethod
    def run_declip_trial(cls, config: ScenarioConfig, target: np.ndarray, task: Task, keep_trace: bool = False):
        row = cls._base_row(config, task)
        try:
            s = signals.noise_scale_for_snr(target, task.snr)
            row['noise_scale'] = s
            y = signals.clip_observe(target, task.clip_level, s, seed=trial_seed(config, task.trial, NOISE_STREAM))
            problem = cls.build_declip_problem(config, y, task.clip_level, s, task.theta, task.mu)
            row, x, result = _solve_and_measure(problem, config, target, row, keep_trace)
            row['mse'] = metrics.mean_squared_error(x, target)
        except (GmeError, ArithmeticError, ValueError) as exc:
            logger.error(f"Declip task {task} failed: {exc}", exc_info=True)
            row['error'] = str(exc)
            return row, None
        return row, result

    @staticmethod
    def _run(config: ScenarioConfig, tasks: List[Task], run_trial, target, trace: bool) -> ExperimentOutcome:
        logger.info(f"Running {config.scenario} experiment: {len(tasks)} solves on {config.workers} worker(s)")

        def work(task: Task):
            return run_trial(config, target, task, keep_trace=trace and task.index == 0)

        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(work, tasks))

        rows = [row for row, _ in results]
        trace_rows = []
        if trace and results and results[0][1] is not None:
            trace_rows = results[0][1].trace_rows()
        failed = sum(1 for row in rows if row.get('error'))
        if failed:
            logger.warning(f"{failed} of {len(rows)} {config.scenario} solves failed")
        logger.info(f"Finished {config.scenario} experiment")
        return ExperimentOutcome(rows=rows, trace_rows=trace_rows)

    @classmethod
    def run_poisson_experiment(cls, config: ScenarioConfig, trace: bool = False) -> ExperimentOutcome:
        target = signals.gen_piecewise_constant(config.n, seed=(config.seed, SIGNAL_STREAM))
        return cls._run(config, cls.poisson_tasks(config), cls.run_poisson_trial, target, trace)

    @classmethod
    def run_declip_experiment(cls, config: ScenarioConfig, trace: bool = False) -> ExperimentOutcome:
        target = signals.gen_dct_sparse(config.n, config.sparsity, seed=(config.seed, SIGNAL_STREAM))
        return cls._run(config, cls.declip_tasks(config), cls.run_declip_trial, target, trace)


def _mean(rows: List[dict], key: str) -> Optional[float]:
    values = [row[key] for row in rows if row.get(key) is not None]
    return float(np.mean(values)) if values else None


def summarize_trials(rows: List[dict]) -> List[dict]:
    """
    Per (scenario cell, theta, mu) means over successful trials, with
    ``best_mu`` marking the mu minimizing the scenario's primary metric
    (mean AE for Poisson, mean MSE for declipping) within each (cell, theta).
    """
    def cell_key(row):
        return (row['scenario'], row.get('clip_level') or 0.0, row.get('snr') or 0.0, row['theta'])

    summary = []
    ordered = sorted(rows, key=lambda r: cell_key(r) + (r['mu'],))
    for _, cell_rows in groupby(ordered, key=cell_key):
        cell_rows = list(cell_rows)
        cell_summary = []
        for mu, mu_rows in groupby(cell_rows, key=lambda r: r['mu']):
            mu_rows = list(mu_rows)
            ok = [r for r in mu_rows if not r.get('error')]
            first = mu_rows[0]
            cell_summary.append({
                'scenario': first['scenario'], 'clip_level': first.get('clip_level'), 'snr': first.get('snr'),
                'theta': first['theta'], 'mu': mu, 'trials': len(mu_rows), 'failed': len(mu_rows) - len(ok),
                'converged_fraction': sum(1 for r in ok if r['converged']) / len(mu_rows),
                'mean_ae': _mean(ok, 'ae'), 'mean_se': _mean(ok, 'se'),
                'mean_tv_count': _mean(ok, 'tv_count'), 'mean_mse': _mean(ok, 'mse'),
                'mean_objective': _mean(ok, 'objective'), 'best_mu': False,
            })
        metric = PRIMARY_METRIC.get(cell_rows[0]['scenario'], 'mean_se')
        scored = [s for s in cell_summary if s[metric] is not None and math.isfinite(s[metric])]
        if scored:
            min(scored, key=lambda s: s[metric])['best_mu'] = True
        summary.extend(cell_summary)
    return summary


def best_mu_rows(summary: List[dict]) -> List[dict]:
    return [row for row in summary if row['best_mu']]


run_poisson_experiment = ExperimentService.run_poisson_experiment
run_declip_experiment = ExperimentService.run_declip_experiment
