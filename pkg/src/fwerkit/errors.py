"""Exception hierarchy shared across the toolkit."""

from __future__ import annotations


class FwerkitError(Exception):
    """Base class for every error raised deliberately by fwerkit."""


class InputError(FwerkitError, ValueError):
    """Malformed or inconsistent user input (tables, data files, ids)."""


class PlanValidationError(InputError):
    """A testing plan failed validation.

    ``violations`` lists every problem found, not just the first one.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid plan: " + "; ".join(self.violations))


class ResamplingError(InputError):
    """Resampling cannot proceed with the requested configuration."""
