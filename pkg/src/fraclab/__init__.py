"""Numerical laboratory for unilateral free-discontinuity problems with p-growth."""

__version__ = "0.1.0"
