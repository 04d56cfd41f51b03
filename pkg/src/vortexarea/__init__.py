"""Relaxed area of the vortex map graph and the free-boundary Plateau problem behind it."""

__version__ = "0.1.0"
