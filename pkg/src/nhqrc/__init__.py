"""Exact simulator for non-Hermitian spin reservoirs."""

__version__ = "0.1.0"
