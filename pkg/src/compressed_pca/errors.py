"""Exception types shared across the package.

Every error carries a short machine-readable ``code`` so the command line
can print ``error: CODE: message`` and map it to a stable exit status.
"""

from __future__ import annotations


class CompressedPCAError(Exception):
    code = "ERROR"
    exit_status = 1

    def __init__(self, message: str, code: str | None = None) -> None:
        super().__init__(message)
        if code is not None:
            self.code = code


class ValidationError(CompressedPCAError, ValueError):
    """Bad arguments, configuration or plan contents."""

    code = "INVALID_INPUT"
    exit_status = 2


class DataError(CompressedPCAError, ValueError):
    """Malformed or inconsistent data files."""

    code = "DATA_ERROR"
    exit_status = 3


class NumericError(CompressedPCAError, ArithmeticError):
    """A numerical routine failed (eigensolver, factorization)."""

    code = "NUMERIC_FAILURE"
    exit_status = 4
