"""Spatially coupled LDPC codes for interleave-division multiple access."""

__version__ = "0.1.0"
