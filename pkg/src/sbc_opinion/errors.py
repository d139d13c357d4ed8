"""Exception types shared across the package."""


class SBCError(Exception):
    """Base class for all package errors."""


class ConfigurationError(SBCError, ValueError):
    """A model or experiment configuration is malformed or inconsistent."""


class RegimeError(SBCError, ValueError):
    """Parameters fall outside the regime where a bound is defined.

    The message names the violated inequality.
    """


class ConditioningError(SBCError, ValueError):
    """An estimator conditioned on Y(0) = 0 was given a different start."""


class InsufficientSamplesError(SBCError, RuntimeError):
    """Too few trajectories survived conditioning to reach a verdict."""

    def __init__(self, message, accepted=None, floor=None):
        super().__init__(message)
        self.accepted = accepted
        self.floor = floor


class BudgetExceededError(SBCError, RuntimeError):
    """A requested simulation exceeds the configured work budget."""
