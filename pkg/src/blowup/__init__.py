"""Numerical lab for type II blow-up of the 3d energy-critical NLS."""

__version__ = "0.1.0"
