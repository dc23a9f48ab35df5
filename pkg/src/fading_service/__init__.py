"""Service process and deterministic service rate of i.i.d. fading channels."""

from .channel import Deterministic, Generic, LinkBudget, Nakagami, Rayleigh, Rician, RngStream
from .errors import BudgetExceeded, DomainError, InsufficientData, NumericalFailure, UnsupportedOperation
from .service_rate import RateResult

__version__ = "0.1.0"

__all__ = [
    "BudgetExceeded",
    "Deterministic",
    "DomainError",
    "Generic",
    "InsufficientData",
    "LinkBudget",
    "Nakagami",
    "NumericalFailure",
    "RateResult",
    "Rayleigh",
    "Rician",
    "RngStream",
    "UnsupportedOperation",
]
