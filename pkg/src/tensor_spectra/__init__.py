"""Spectral statistics of tensor products of Haar-random unitary matrices."""

__version__ = "0.1.0"
