"""Steady-state entanglement of two membranes in a driven optical cavity."""

from .core import SystemParams, DomainError, thermal_occupation

__version__ = "0.1.0"

__all__ = ["SystemParams", "DomainError", "thermal_occupation", "__version__"]
