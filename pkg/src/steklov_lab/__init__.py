"""Discrete and finite-element Steklov spectra of graphs and glued flat surfaces."""

__version__ = "0.1.0"
