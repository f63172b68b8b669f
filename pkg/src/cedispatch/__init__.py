"""Frequency-secure robust day-ahead dispatch with causal correction."""

__version__ = "0.1.0"
