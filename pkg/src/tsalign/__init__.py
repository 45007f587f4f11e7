"""Synthetic time series with exact attribute descriptions, QA generation and evaluation."""

__version__ = "0.1.0"
