"""Exception types raised across the package."""

from __future__ import annotations


class GTSagaError(Exception):
    """Base class for all package errors."""


class InvalidArgument(GTSagaError, ValueError):
    pass


class GenerationFailure(GTSagaError, RuntimeError):
    pass


class InconsistentConstants(GTSagaError, ValueError):
    pass


class OracleFailure(GTSagaError, RuntimeError):
    pass


class NumericFailure(GTSagaError, ArithmeticError):
    pass


class InvalidState(GTSagaError, RuntimeError):
    pass


class DivergenceDetected(GTSagaError, FloatingPointError):
    """An iterate became non-finite or exceeded the divergence threshold.

    ``k`` is the iteration (1-based round index) whose estimate update blew up
    and ``norm`` the largest node-estimate norm observed there.  ``trace``
    carries the rows recorded before the failure, when raised from a run.
    """

    def __init__(self, k: int, norm: float, trace=None):
        super().__init__(f"divergence detected at iteration {k} (max ||x_i|| = {norm:.3e})")
        self.k = k
        self.norm = norm
        self.trace = trace


class CertificateFailure(GTSagaError, RuntimeError):
    def __init__(self, rows, message: str | None = None):
        self.rows = list(rows)
        super().__init__(message or f"entrywise rate check fails in row(s) {self.rows}")


class ConfigError(GTSagaError, ValueError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class PlotError(GTSagaError, ValueError):
    pass
