"""Numerical laboratory for the mass-critical fourth-order NLS
``i u_t + Delta^2 u + lam |u|^{8/n} u = 0``."""

__version__ = "0.1.0"
