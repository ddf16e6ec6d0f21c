"""Spectroscopy and gate dynamics for capacitively coupled fluxonium lattices."""

__version__ = "0.1.0"
