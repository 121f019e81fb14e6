"""
Solve a single problem described in a problem file.

The problem is certified (overall convexity and minimizer existence) before
solving; an uncertified problem is rejected.

Usage:
    python manage.py solve problem.txt
    python manage.py solve problem.txt --out solution.csv --trace trace.csv --trace-every 100
"""

from django.core.management.base import BaseCommand, CommandError

from gme.exceptions import ConvergenceError, GmeError
from gme.gme_model import certify, evaluate_objective
from gme.serialization import load_problem
from gme.solver import default_params, solve

from experiments.utils.csv_io import write_csv, write_trace


class Command(BaseCommand):
    help = 'Solve one GME problem from a problem file and write the estimate as CSV'

    def add_arguments(self, parser):
        parser.add_argument('problem', help='Problem file (key = value lines with optional matrix blocks)')
        parser.add_argument('--out', default='-', help='Estimate CSV path (default: standard output)')
        parser.add_argument('--trace', help='Write the per-iteration residual trace to this CSV')
        parser.add_argument('--tol', type=float, help='Stopping tolerance on ||h_k - h_(k-1)||')
        parser.add_argument('--max-iter', type=int, help='Iteration cap')
        parser.add_argument('--trace-every', type=int, default=0, help='Sample the cost every k iterations')
        parser.add_argument('--metric-trace', action='store_true', help='Also record residuals in the solver metric')

    def handle(self, *args, **options):
        report = self.stderr if options['out'] in (None, '-') else self.stdout
        try:
            problem = certify(load_problem(options['problem']))
            if not problem.convexity_certified:
                raise CommandError(
                    f"Problem is not overall convex (min_eig={problem.convexity.min_eig:.3e}); adjust the GME matrix"
                )
            if not problem.existence_certified:
                report.write(self.style.WARNING('No minimizer-existence condition holds for this problem'))
            params = default_params(problem, tol=options['tol'], max_iter=options['max_iter'])
            result = solve(
                problem, params,
                trace_every=options['trace_every'], metric_trace=options['metric_trace'],
            )
        except GmeError as exc:
            raise CommandError(str(exc)) from exc

        rows = ({'index': i, 'value': float(v)} for i, v in enumerate(result.x))
        write_csv(options['out'], ('index', 'value'), rows, self.stdout)
        if options['trace']:
            write_trace(options['trace'], result.trace_rows(), self.stdout)

        try:
            objective = f"{evaluate_objective(problem, result.x).total:.10g}"
        except ConvergenceError as exc:
            objective = f"~{problem.loss.value(problem.forward.apply(result.x)) + problem.mu * exc.last_value:.10g}"

        message = (
            f"iterations={result.iterations} residual={result.final_residual:.3e} "
            f"objective={objective} existence={problem.existence.condition}"
        )
        if result.converged:
            report.write(self.style.SUCCESS(f"Converged: {message}"))
        else:
            report.write(self.style.WARNING(f"Not converged: {message}"))
