"""Moments of the logarithmic derivative of characteristic polynomials of Haar-random compact group matrices."""

__version__ = "0.1.0"
