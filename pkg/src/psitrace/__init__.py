"""Boundary traces of Dirichlet eigenfunctions: closed forms, numerical
re-derivation, collar diagnostics, separated band solves and P1 finite
elements on polygons."""

__version__ = "0.1.0"
