"""Exception types shared across the library."""

from __future__ import annotations


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConvergenceError(RuntimeError):
    """An iterative solver failed to reach its tolerance within its budget."""


class NumericalError(RuntimeError):
    """An internal consistency check between two computation routes failed."""


class ConfigError(ValueError):
    """A run configuration is malformed or violates its schema."""
