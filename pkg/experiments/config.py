"""
Scenario configuration for the experiment harness.

Values are layered: ``ScenarioConfig`` defaults, then the Django setting
``GME_EXPERIMENTS['POISSON' | 'DECLIP']``, then a ``key = value`` config file,
then command-line flags.
"""

from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional, Tuple
import logging

from django.conf import settings

from gme.exceptions import ConfigError
from gme.serialization import parse_float_list, parse_key_values

logger = logging.getLogger(__name__)

SCENARIOS = ('poisson', 'declip')


@dataclass(frozen=True)
class ScenarioConfig:
    """One experiment: a grid of (cell, theta, mu) combinations times trials."""
    scenario: str
    n: int
    mu_grid: Tuple[float, ...]
    thetas: Tuple[float, ...] = (0.0, 0.99)
    trials: int = 100
    seed: int = 0
    tol: float = 1e-6
    max_iter: int = 1_000_000
    workers: int = 1
    trace_every: int = 0
    tail: str = 'zero'
    # poisson
    box_lo: float = 5.0
    box_hi: float = 40.0
    # declip
    clip_levels: Tuple[float, ...] = (0.4, 0.6)
    snrs: Tuple[float, ...] = (5.0, 10.0, 15.0)
    margin_factor: float = 10.0
    sparsity: int = 16

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"Unknown scenario '{self.scenario}', expected one of {SCENARIOS}")
        for name in ('mu_grid', 'thetas', 'clip_levels', 'snrs'):
            if not getattr(self, name):
                raise ConfigError(f"'{name}' must not be empty")
        if any(mu <= 0 for mu in self.mu_grid):
            raise ConfigError("All mu values must be positive")
        if any(not 0.0 <= t < 1.0 for t in self.thetas):
            raise ConfigError("All theta values must lie in [0, 1)")
        if self.trials < 1 or self.workers < 1 or self.max_iter < 1:
            raise ConfigError("trials, workers and max_iter must be at least 1")
        if self.seed < 0:
            raise ConfigError(f"seed must be nonnegative, got {self.seed}")
        if not self.tol > 0:
            raise ConfigError(f"tol must be positive, got {self.tol}")
        if self.scenario == 'poisson' and not 0 < self.box_lo < self.box_hi:
            raise ConfigError(f"Poisson box must satisfy 0 < lo < hi, got [{self.box_lo}, {self.box_hi}]")
        if self.scenario == 'declip' and not 1 <= self.sparsity <= self.n:
            raise ConfigError(f"sparsity must lie in [1, n], got {self.sparsity}")


TUPLE_FIELDS = {'mu_grid', 'thetas', 'clip_levels', 'snrs'}
INT_FIELDS = {'n', 'trials', 'seed', 'max_iter', 'workers', 'trace_every', 'sparsity'}
STR_FIELDS = {'scenario', 'tail'}
CONFIG_KEYS = tuple(f.name for f in fields(ScenarioConfig))


def _coerce(key: str, value: str, lineno: int = 0):
    if key in STR_FIELDS:
        return value.strip()
    if key in TUPLE_FIELDS:
        return tuple(parse_float_list(value, key, lineno))
    try:
        return int(value) if key in INT_FIELDS else float(value)
    except ValueError as exc:
        raise ConfigError(f"Line {lineno}: '{key}' has malformed value '{value}'") from exc


def _settings_defaults(scenario: str) -> dict:
    experiments = getattr(settings, 'GME_EXPERIMENTS', {}) if settings.configured else {}
    raw = dict(experiments.get(scenario.upper(), {}))
    overrides = {}
    for key, value in raw.items():
        name = key.lower()
        if name not in CONFIG_KEYS:
            logger.warning(f"Ignoring unknown GME_EXPERIMENTS['{scenario.upper()}'] key '{key}'")
            continue
        overrides[name] = tuple(value) if name in TUPLE_FIELDS else value
    return overrides


def default_config(scenario: str) -> ScenarioConfig:
    """Built-in defaults for a scenario, overridden by ``settings.GME_EXPERIMENTS``."""
    if scenario == 'poisson':
        base = dict(
            scenario='poisson', n=150, mu_grid=(0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.5, 2.0),
            trials=100, tol=1e-6,
        )
    elif scenario == 'declip':
        base = dict(
            scenario='declip', n=256, mu_grid=(1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0),
            trials=50, tol=1e-4,
        )
    else:
        raise ConfigError(f"Unknown scenario '{scenario}', expected one of {SCENARIOS}")
    base.update(_settings_defaults(scenario))
    return ScenarioConfig(**base)


def parse_config_text(text: str, base: ScenarioConfig) -> ScenarioConfig:
    """
    Apply ``key = value`` lines on top of ``base``.

    Raises:
        ConfigError: naming the line of an unknown key or malformed value
    """
    doc = parse_key_values(text, allowed=CONFIG_KEYS)
    if doc.blocks:
        raise ConfigError("Scenario config files do not take matrix blocks")
    changes = {key: _coerce(key, value, lineno) for key, (value, lineno) in doc.values.items()}
    if changes.get('scenario', base.scenario) != base.scenario:
        raise ConfigError(
            f"Line {doc.line_of('scenario')}: config is for '{changes['scenario']}', not '{base.scenario}'"
        )
    return replace(base, **changes)


def load_config(scenario: str, path: Optional[str] = None, **overrides) -> ScenarioConfig:
    """
    Defaults, then the config file at ``path``, then non-None ``overrides``.
    """
    config = default_config(scenario)
    if path:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"Cannot read config file {path}: {exc}") from exc
        config = parse_config_text(text, config)
    changes = {k: v for k, v in overrides.items() if v is not None}
    unknown = set(changes) - set(CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"Unknown config overrides: {sorted(unknown)}")
    return replace(config, **changes)
