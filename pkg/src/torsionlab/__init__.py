"""Torsion function, principal Dirichlet eigenvalue and their product."""

__version__ = "0.1.0"
