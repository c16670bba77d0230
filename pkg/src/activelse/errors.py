"""Semantic exception hierarchy.

Public functions raise these instead of bare ValueError so that callers (and
the CLI exit-code mapping) can tell configuration mistakes apart from numeric
failures.
"""


class ActiveLseError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(ActiveLseError, ValueError):
    """An argument is outside the mathematical domain of the operation."""


class ConfigError(ActiveLseError, ValueError):
    """An experiment or solver configuration is invalid."""


class NumericError(ActiveLseError, FloatingPointError):
    """A numeric invariant was violated beyond tolerance."""


class FitError(ActiveLseError, RuntimeError):
    """Surrogate fitting diverged or could not be stabilized.

    Carries a ``diagnostics`` dict with the last objective value, the jitter
    level reached, and the step count.
    """

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class OptimError(ActiveLseError, RuntimeError):
    """Acquisition maximization saw non-finite values it cannot recover from.

    Carries a ``diagnostics`` dict locating the first offending candidate.
    """

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
