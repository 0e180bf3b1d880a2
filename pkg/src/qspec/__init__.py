"""Spectral theory of nonlinear operators on coordinate spaces, checked numerically."""

__version__ = "0.1.0"
