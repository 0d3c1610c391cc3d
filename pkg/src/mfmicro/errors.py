"""Exception types shared across the package."""


class MfmicroError(Exception):
    """Base class for all package errors."""


class ConfigError(MfmicroError):
    """Invalid grid, potential, or job configuration."""


class GridMismatchError(MfmicroError):
    """Operands live on different grids."""


class PotentialDomainError(MfmicroError):
    """Pair potential is not usable on the requested domain (non-finite values)."""


class InfeasibleEnergyError(MfmicroError):
    """Requested energy lies at or below the attainable minimum."""


class ConvergenceError(MfmicroError):
    """Iterative solver failed to reach its tolerance.

    Carries the residual history so callers can inspect the failure.
    """

    def __init__(self, message, residuals=None, best=None):
        super().__init__(message)
        self.residuals = residuals if residuals is not None else []
        self.best = best
