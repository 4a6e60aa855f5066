"""Neutral cubic saddles: Dulac passages, passage integrals and return-time statistics."""
from .errors import ComputationError, InvalidConfig, SaddleError
from .saddle_model import Exponents, SaddleParams, reduced_family, validate

__all__ = ["ComputationError", "Exponents", "InvalidConfig", "SaddleError", "SaddleParams",
           "reduced_family", "validate"]
__version__ = "0.1.0"
