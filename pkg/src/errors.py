"""Structured errors raised across the toolkit.

Every error is a ValueError so callers that only know about bad input keep
working; the ``context`` dict carries the numbers a log line or a CLI exit
message needs (dimensions, eigenvalues, the offending (j, k, mu), ...).
"""
from typing import Any, Dict, Optional


class AnalysisError(ValueError):
    """Base class. ``context`` holds structured diagnostic fields."""

    def __init__(self, message: str, context: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.context: Dict[str, Any] = dict(context or {})

    def __str__(self) -> str:
        base = super().__str__()
        if not self.context:
            return base
        details = ", ".join(f"{k}={v}" for k, v in self.context.items())
        return f"{base} ({details})"


# --- Linear algebra ---

class DimensionError(AnalysisError):
    pass


class NotHermitianError(AnalysisError):
    pass


class NegativeSpectrumError(AnalysisError):
    pass


class SupportError(AnalysisError):
    """supp(rho) is not contained in supp(sigma) beyond the spectral floor."""


class GramSingularError(AnalysisError):
    pass


# --- Statistics and estimation ---

class StochasticMatrixError(AnalysisError):
    pass


class SiftingError(AnalysisError):
    pass


class InfeasibleError(AnalysisError):
    pass


# --- Certification ---

class CertificateError(AnalysisError):
    pass


class SquashingFailure(AnalysisError):
    pass


# --- Configuration ---

class ConfigError(AnalysisError):
    pass
