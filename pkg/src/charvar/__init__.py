"""Numerical tools for the characteristic variety of the reduced linearized
isometric-embedding system."""

__version__ = "0.1.0"
