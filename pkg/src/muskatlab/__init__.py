"""Muskat contour-dynamics laboratory."""

__version__ = "0.1.0"
