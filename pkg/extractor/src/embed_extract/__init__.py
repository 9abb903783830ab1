"""Transformer hidden-state extraction to the token-embedding interchange format."""

__version__ = "0.1.0"
