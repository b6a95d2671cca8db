"""Spatially-coupled split-component codes: ensembles, peeling, and threshold analysis."""

__version__ = "0.1.0"
