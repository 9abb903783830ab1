"""Optimal-transport text evaluation metrics and their sensitivity harness."""

__version__ = "0.1.0"
