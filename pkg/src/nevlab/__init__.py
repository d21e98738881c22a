"""Numerical laboratory for Ahlfors currents and value distribution of holomorphic maps."""

__version__ = "0.1.0"
