"""Exact and Monte Carlo laboratory for the algorithmic stability of ERM on finite hypothesis spaces."""

__version__ = "0.1.0"
