"""Steady periodic hydroelastic waves on rotational flow in a finite-depth strip."""

__version__ = "0.1.0"
