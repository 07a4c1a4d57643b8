"""Exception and warning types raised across the package."""


class BowRefineError(Exception):
    """Base class for all package errors."""


class ConfigError(BowRefineError, ValueError):
    """Invalid configuration value, detected before any computation."""


class DimensionMismatch(BowRefineError, ValueError):
    pass


class RankDeficient(BowRefineError, ValueError):
    """Constraint matrix of a basis-pursuit problem lacks full row rank."""


class InsufficientSpectrum(BowRefineError, ValueError):
    """Fewer nontrivial eigenpairs than requested clusters."""

    def __init__(self, message, available=None):
        super().__init__(message)
        self.available = available


class NoPositives(BowRefineError, ValueError):
    """Average precision requested for a class with no relevant items."""


class NotConvergedWarning(UserWarning):
    """An iterative solver stopped at its iteration cap; the best iterate was kept."""
