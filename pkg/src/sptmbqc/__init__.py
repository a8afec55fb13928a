"""Measurement-based quantum computation on symmetry-protected spin chains."""

__version__ = "0.1.0"
