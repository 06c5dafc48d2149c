"""Symmetry-aware solution prediction for integer linear programs."""

__version__ = "0.1.0"
