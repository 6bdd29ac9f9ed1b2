"""Finite-N laboratory for the spherical SK overlap MGF with a microscopic field."""

__version__ = "0.1.0"
