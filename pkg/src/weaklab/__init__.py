"""Quantitative verification of Euler-scheme weak-error expansions."""

__version__ = "0.1.0"
