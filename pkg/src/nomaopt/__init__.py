"""Optimal resource allocation for downlink NOMA versus orthogonal access."""

__version__ = "0.1.0"
