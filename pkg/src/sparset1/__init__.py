"""Sparse domination toolkit for discretized Calderon-Zygmund forms."""

__version__ = "0.1.0"
