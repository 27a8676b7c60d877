"""Numerical laboratory for global-injectivity experiments: fiber
enumeration for local diffeomorphisms, plane-preimage surface tracing,
discrete harmonic solves, and topological index checks."""

__version__ = "0.1.0"
