"""Generalized Abel equations and the elliptical/hyperbolic Radon transforms they invert."""

__version__ = "0.1.0"
