"""Congestion-aware challenge deadlines for optimistic protocols."""

__version__ = "0.1.0"
