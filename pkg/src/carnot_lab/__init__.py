"""Exact computations on Carnot groups: structure, group law, rank, maps."""
__version__ = "0.1.0"
