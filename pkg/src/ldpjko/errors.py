"""Exception hierarchy shared across modules."""


class LdpJkoError(Exception):
    """Base class for all package errors."""


class GridMismatchError(LdpJkoError, ValueError):
    """Two measures live on incompatible grids."""


class UndefinedQuantileError(LdpJkoError, ValueError):
    """The CDF is flat at the requested level, so the quantile is not unique."""


class SolverError(LdpJkoError, RuntimeError):
    """An iterative solver failed; the CLI maps these to exit code 2."""


class NonConvergenceError(SolverError):
    def __init__(self, message, last_error=None, iterations=None):
        super().__init__(message)
        self.last_error = last_error
        self.iterations = iterations


class OverflowGuardError(SolverError):
    """Log-domain potentials left the configured range (epsilon too small for the grid)."""


class MonotonicityError(SolverError):
    """A quantile profile lost strict monotonicity."""


class ConfigError(LdpJkoError, ValueError):
    """Invalid experiment configuration; the CLI maps these to exit code 3."""
