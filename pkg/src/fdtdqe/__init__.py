"""Coupled FDTD and two-level emitter simulation in natural units."""

__version__ = "0.1.0"
