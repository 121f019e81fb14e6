"""
Simultaneous declipping and denoising experiment over clip levels and SNRs,
convex model (theta = 0) against the GME model.

Usage:
    python manage.py declip --trials 10 --mu 1,5,20
    python manage.py declip --config declip.cfg --out declip.csv --summary summary.csv
"""

from experiments.management.base import ScenarioCommand
from experiments.services.scenarios import ExperimentService


class Command(ScenarioCommand):
    help = 'Run the declipping/denoising experiment and write per-trial results as CSV'
    scenario = 'declip'

    def run_experiment(self, config, trace):
        return ExperimentService.run_declip_experiment(config, trace=trace)
