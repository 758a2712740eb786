"""Bangla signboard address extraction: detection geometry, synthetic data,
text-line recognition, post-correction and address parsing."""

__version__ = "0.1.0"
