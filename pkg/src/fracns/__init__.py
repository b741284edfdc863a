"""Spectral laboratory for the Navier-Stokes equations with fractional dissipation."""

__version__ = "0.1.0"
