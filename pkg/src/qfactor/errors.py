"""Exception types shared across the package.

The CLI maps these onto distinct process exit codes, so library code
should raise the most specific type that applies.
"""


class QFactorError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigurationError(QFactorError):
    """Invalid model/run configuration (bad tau, k out of bounds, unknown keys)."""

    exit_code = 2


class DataError(QFactorError):
    """Input data problems: wrong shape, non-finite values, degenerate inputs."""

    exit_code = 3


class NumericalError(QFactorError):
    """Numerical failure inside an algorithm (singular matrix, non-finite kernel)."""

    exit_code = 4
