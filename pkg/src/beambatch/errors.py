"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1, DataError (and OSError)
-> 2, InvariantViolation -> 3.
"""

from __future__ import annotations


class ConfigError(ValueError):
    """A configuration value or combination of values is invalid."""


class DataError(ValueError):
    """An input file or data payload is malformed or inconsistent."""


class InvariantViolation(RuntimeError):
    """An internal contract was broken; indicates a programming error."""
