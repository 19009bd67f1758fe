"""Numerical laboratory for s-Riesz transforms of planar measures."""

__version__ = "0.1.0"
