"""Dependency-weighted graph convolution for aspect-level sentiment."""

__version__ = "0.1.0"
