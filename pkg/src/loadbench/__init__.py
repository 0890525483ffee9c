"""Probabilistic load-forecasting benchmark engine and decision toolkit."""

__version__ = "0.1.0"
