"""Numerical laboratory for Dirichlet eigenvalue stability under domain perturbation."""

__version__ = "0.1.0"
