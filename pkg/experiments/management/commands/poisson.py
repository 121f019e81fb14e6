"""
Poisson denoising experiment: convex TV model (theta = 0) against the GME
model over a mu grid, with fresh Poisson observations per trial.

Usage:
    python manage.py poisson --seed 42 --trials 5
    python manage.py poisson --mu 0.6,1.0 --theta 0,0.99 --out poisson.csv --summary summary.csv
"""

from experiments.management.base import ScenarioCommand
from experiments.services.scenarios import ExperimentService


class Command(ScenarioCommand):
    help = 'Run the Poisson denoising experiment and write per-trial results as CSV'
    scenario = 'poisson'

    def run_experiment(self, config, trace):
        return ExperimentService.run_poisson_experiment(config, trace=trace)
