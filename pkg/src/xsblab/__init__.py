"""Numerical laboratory for Bourgain-space estimates of nonlinear Schrodinger equations."""

__version__ = "0.1.0"
