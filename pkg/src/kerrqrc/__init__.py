"""Quantum reservoir computing with a single dissipative Kerr oscillator."""

__version__ = "0.1.0"

from .backend import NAME as BACKEND  # noqa: E402

__all__ = ["BACKEND", "__version__"]
