"""Anisotropic Besov approximation and estimation laboratory."""

__version__ = "0.1.0"
