"""Exception hierarchy.

Every error carries the process exit status the CLI reports for it.
"""

from __future__ import annotations


class EhsasError(Exception):
    exit_code = 1


class ConfigError(EhsasError, ValueError):
    """Invalid parameters, specs or configuration files."""

    exit_code = 2


class InputError(ConfigError):
    """Non-finite or otherwise unusable signal values."""


class DataError(EhsasError):
    """Dataset too short or misaligned for the requested operation."""

    exit_code = 3


class IdentifiabilityError(EhsasError):
    exit_code = 4


class TuningError(EhsasError):
    exit_code = 5


class DivergenceError(EhsasError):
    """A simulation produced non-finite values.

    ``index`` is the sample (or integration step) at which it happened.
    """

    exit_code = 6

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class AnalysisError(EhsasError):
    """A frequency-domain or metric computation has no defined answer."""

    exit_code = 7


class MetricUndefinedError(AnalysisError):
    def __init__(self, message: str, metric: str | None = None):
        super().__init__(message)
        self.metric = metric
