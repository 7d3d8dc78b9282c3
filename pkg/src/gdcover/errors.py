"""Exception hierarchy shared across the package.

Each error carries the process exit code the command-line tool maps it to.
"""


class GdcoverError(Exception):
    """Base class for all package errors."""

    exit_code = 3


class ValidationError(GdcoverError):
    """Input data violates a structural precondition."""

    exit_code = 1


class ResourceLimitError(GdcoverError):
    """An enumeration would exceed the configured cap."""

    exit_code = 2


class NumericalError(GdcoverError):
    """An iteration failed to reach its tolerance or a root does not exist."""

    exit_code = 3


class InconclusiveRegimeError(GdcoverError):
    """The condensation integral sits too close to the decision boundary."""

    exit_code = 4
