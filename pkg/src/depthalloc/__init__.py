"""Optimal depth-plane allocation for multifocal displays."""

__version__ = "0.1.0"
