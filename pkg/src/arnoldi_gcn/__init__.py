"""Explicit spectral graph filters fitted by Vandermonde-with-Arnoldi polynomials."""

__version__ = "0.1.0"
