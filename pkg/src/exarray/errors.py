"""Exception types shared across the package and mapped to CLI exit codes."""

from __future__ import annotations


class ExArrayError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(ExArrayError):
    """A config file or parameter set violates its schema."""


class BudgetExceededError(ExArrayError):
    """An exact enumeration would exceed the term budget.

    Carries enough context for the caller to fall back to Monte Carlo.
    """

    def __init__(self, needed: int, budget: int, suggestion: str = "use the Monte Carlo variant"):
        self.needed = needed
        self.budget = budget
        self.suggestion = suggestion
        super().__init__(
            f"exact enumeration needs {needed} terms, budget is {budget}; {suggestion}"
        )


class InsufficientDataError(ExArrayError):
    """A conditional estimate has no (or too few) conditioning events."""

    def __init__(self, message: str, counts: dict[str, int]):
        self.counts = counts
        super().__init__(f"{message} (counts: {counts})")
