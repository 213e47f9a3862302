"""Exception hierarchy shared by every gridlab module."""

from __future__ import annotations


class GridlabError(Exception):
    """Base class for all gridlab errors."""


class CaseParseError(GridlabError, ValueError):
    """Raised when a case file cannot be parsed.

    ``line`` carries the 1-based line number when the failure can be
    attributed to one, ``key`` the offending JSON key.
    """

    def __init__(self, message: str, *, line: int | None = None, key: str | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
        self.key = key


class ValidationError(GridlabError, ValueError):
    """Raised when structurally valid input violates a model invariant."""


class NumericalError(GridlabError, ArithmeticError):
    """Raised when a numerical kernel cannot produce a trustworthy result."""
