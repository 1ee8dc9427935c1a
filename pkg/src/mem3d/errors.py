"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class Mem3dError(Exception):
    exit_code = 2


class DataError(Mem3dError):
    """Bad or missing input data: unreadable files, corrupt headers, empty splits."""

    exit_code = 2


class NumericalError(Mem3dError):
    """A statistic cannot be computed (zero variance, non-PSD covariance)."""

    exit_code = 3
