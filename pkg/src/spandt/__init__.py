"""Span-program quantum algorithms for colored decision trees, simulated classically."""

from ._backend import DEFAULT as BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
