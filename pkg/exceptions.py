"""
Error hierarchy for the key-rate toolkit.
Numerical routines raise these; the CLI maps them to exit codes.
"""

from typing import Any, Optional


class KeyRateError(Exception):
    """Base class for every error raised by this project."""


class DomainError(KeyRateError, ValueError):
    """A numeric input lies outside the domain of the requested operation."""

    def __init__(self, message: str, value: Any = None):
        super().__init__(message)
        self.value = value


class ConvergenceError(KeyRateError, ArithmeticError):
    """The eigensolver exhausted its sweep budget."""

    def __init__(self, message: str, residual: float, sweeps: int):
        super().__init__(f"{message} (residual={residual:.3e}, sweeps={sweeps})")
        self.residual = residual
        self.sweeps = sweeps


class AccuracyError(KeyRateError, ArithmeticError):
    """Adaptive quadrature could not reach the requested tolerance."""

    def __init__(self, message: str, estimate: Any, error_estimate: float):
        super().__init__(f"{message} (error estimate={error_estimate:.3e})")
        self.estimate = estimate
        self.error_estimate = error_estimate


class UndefinedRateError(KeyRateError, ArithmeticError):
    """A rate normalized by the sifting probability was requested with p_sift = 0."""

    def __init__(self, message: str, p_sift: float = 0.0):
        super().__init__(message)
        self.p_sift = p_sift


class ConfigurationError(KeyRateError, ValueError):
    """Invalid run configuration (empty grids, malformed config files)."""


class VerificationError(KeyRateError):
    """A numerical verification breached its tolerance."""

    def __init__(self, message: str, report: Optional[dict] = None):
        super().__init__(message)
        self.report = report or {}
