"""
Shared command-line plumbing for the scenario commands.

Usage:
    python manage.py poisson --seed 42 --trials 5 --out poisson.csv
    python manage.py declip --config declip.cfg --mu 1,5,20 --summary summary.csv
"""

import sys

from django.core.management.base import BaseCommand, CommandError

from gme.exceptions import ConfigError, GmeError
from gme.serialization import parse_float_list

from experiments.config import load_config
from experiments.services.scenarios import RESULT_FIELDS, SUMMARY_FIELDS, best_mu_rows, summarize_trials
from experiments.utils.csv_io import write_csv, write_trace


def float_list(value: str):
    try:
        return tuple(parse_float_list(value, 'list'))
    except ConfigError as exc:
        raise CommandError(str(exc)) from exc


class ScenarioCommand(BaseCommand):
    """Base class for commands that run one experiment scenario."""
    scenario = None

    def add_arguments(self, parser):
        parser.add_argument('--config', help='Scenario config file (key = value lines)')
        parser.add_argument('--seed', type=int, help='Base seed; trial k uses seed + k')
        parser.add_argument('--out', default='-', help='Result CSV path (default: standard output)')
        parser.add_argument('--trace', help='Write the residual trace of the first solve to this CSV')
        parser.add_argument('--theta', type=float_list, help='Comma-separated theta values (0 = convex model)')
        parser.add_argument('--mu', type=float_list, help='Comma-separated mu grid')
        parser.add_argument('--trials', type=int, help='Trials per (cell, theta, mu)')
        parser.add_argument('--workers', type=int, help='Worker threads')
        parser.add_argument('--summary', help='Write per-(cell, theta, mu) means to this CSV')
        parser.add_argument('--tol', type=float, help='Stopping tolerance on ||h_k - h_(k-1)||')
        parser.add_argument('--max-iter', type=int, help='Iteration cap per solve')
        parser.add_argument('--trace-every', type=int, help='Sample the cost every k iterations in the trace')

    def run_experiment(self, config, trace: bool):
        raise NotImplementedError

    def handle(self, *args, **options):
        try:
            config = load_config(
                self.scenario, options['config'],
                seed=options['seed'], thetas=options['theta'], mu_grid=options['mu'],
                trials=options['trials'], workers=options['workers'], tol=options['tol'],
                max_iter=options['max_iter'], trace_every=options['trace_every'],
            )
            outcome = self.run_experiment(config, trace=bool(options['trace']))
        except GmeError as exc:
            raise CommandError(str(exc)) from exc

        write_csv(options['out'], RESULT_FIELDS, outcome.rows, self.stdout)
        if options['trace']:
            write_trace(options['trace'], outcome.trace_rows, self.stdout)

        summary = summarize_trials(outcome.rows)
        if options['summary']:
            write_csv(options['summary'], SUMMARY_FIELDS, summary, self.stdout)

        # keep stdout clean when it carries the CSV
        report = self.stderr if options['out'] in (None, '-') else self.stdout
        failed = sum(1 for row in outcome.rows if row.get('error'))
        for row in best_mu_rows(summary):
            cell = '' if row['clip_level'] is None else f" clip={row['clip_level']} snr={row['snr']}dB"
            report.write(
                f"{self.scenario}{cell} theta={row['theta']}: best mu={row['mu']} "
                f"mean AE={row['mean_ae']} mean SE={row['mean_se']} "
                f"mean TV count={row['mean_tv_count']} mean MSE={row['mean_mse']}"
            )
        if failed:
            report.write(self.style.WARNING(f"{failed} of {len(outcome.rows)} solves failed; see the error column"))
        else:
            report.write(self.style.SUCCESS(f"Completed {len(outcome.rows)} solves"))
