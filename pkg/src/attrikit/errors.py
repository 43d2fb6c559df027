"""Exception hierarchy shared across the package.

The CLI maps ConfigError to exit code 2 and DataError to exit code 3;
everything else is a bug.
"""

from __future__ import annotations


class AttrikitError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(AttrikitError):
    """Invalid configuration: bad flags, malformed config files, N < 2, ..."""


class DataError(AttrikitError):
    """Invalid or inconsistent data: schema violations, corrupt journals, ..."""
