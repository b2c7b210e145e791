"""Exception types shared across the package.

Each class maps onto one CLI exit code, see :mod:`fppshape.cli`.
"""


class FPPError(Exception):
    exit_code = 3


class UsageError(FPPError, ValueError):
    """Bad arguments or preconditions supplied by the caller."""

    exit_code = 1


class DataFormatError(FPPError, ValueError):
    """A file could not be parsed or violates its schema."""

    exit_code = 2


class DiagnosticError(FPPError, RuntimeError):
    """A numerical routine failed to converge or produced garbage."""

    exit_code = 3
