"""
Error hierarchy for the GME solver library.

All library errors derive from GmeError so callers (management commands,
experiment runners) can catch one type and still branch on the specific kind.
"""


class GmeError(Exception):
    """Base class for every error raised by the gme package."""


class ParameterError(GmeError, ValueError):
    """A scalar parameter is outside its admissible range."""


class InputError(GmeError, ValueError):
    """Malformed input data: shapes, non-finite entries, observation ranges."""


class DomainError(GmeError, ValueError):
    """A loss derivative or curvature was requested outside its domain."""


class InvariantError(GmeError, ValueError):
    """A constructed object would violate one of its invariants."""


class ResourceError(GmeError, MemoryError):
    """Dense materialization would exceed the configured memory budget."""


class ConvergenceError(GmeError, ArithmeticError):
    """
    An iterative routine stopped before reaching its tolerance.

    Args:
        message: Human readable description
        last_value: Last estimate produced (Rayleigh quotient, inner minimum, ...)
        iterations: Number of iterations performed
    """

    def __init__(self, message: str, last_value: float = float('nan'), iterations: int = 0):
        super().__init__(message)
        self.last_value = last_value
        self.iterations = iterations


class DesignError(GmeError, ValueError):
    """A GME-matrix designer was called outside its preconditions."""


class UnboundedCurvatureError(DesignError):
    """A loss has unbounded second derivative on an interval."""


class MetricError(GmeError, ArithmeticError):
    """The solver metric is not positive definite for the chosen parameters."""


class ConfigError(GmeError, ValueError):
    """Unknown key or malformed value in a config or problem file."""


class ConstructionError(GmeError, ValueError):
    """A derived object (e.g. an extrapolated loss) could not be built."""
