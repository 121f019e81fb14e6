"""
Numeric defaults for the gme library.

Defaults are plain dataclass values so the library works without Django.
When the Django settings module is configured, the ``GME`` setting (a dict of
upper-case keys) overrides individual fields.
"""

from dataclasses import dataclass, fields, replace
import logging

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NumericDefaults:
    """Tolerances and iteration caps shared across the library"""
    operator_norm_tol: float = 1e-10
    operator_norm_max_iter: int = 100_000
    materialize_max_entries: int = 25_000_000
    psd_tol: float = 1e-10
    inner_tol: float = 1e-10
    inner_max_iter: int = 100_000
    solver_tol: float = 1e-6
    solver_max_iter: int = 1_000_000
    feasibility_tol: float = 1e-9


def get_defaults() -> NumericDefaults:
    """
    Return the numeric defaults, applying Django ``settings.GME`` overrides.

    Returns:
        NumericDefaults instance
    """
    defaults = NumericDefaults()
    try:
        from django.conf import settings
        if not settings.configured:
            return defaults
        overrides = getattr(settings, 'GME', {}) or {}
    except ImportError:
        return defaults

    known = {f.name.upper(): f.name for f in fields(NumericDefaults)}
    changes = {}
    for key, value in overrides.items():
        if key not in known:
            logger.warning(f"Ignoring unknown GME setting '{key}'")
            continue
        changes[known[key]] = value
    return replace(defaults, **changes)
