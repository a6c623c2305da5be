"""Pseudospectral fractional Burgers solver with De Giorgi diagnostics."""

__version__ = "0.1.0"
