"""Pseudo-spectral toolkit for the 2D compressible Navier-Stokes equations
with fractional dissipation ``(-Delta)^beta``, 1/2 <= beta < 1."""

from .spectral import Grid, PhysParams, SpectralField, State

__version__ = "0.1.0"

__all__ = ["Grid", "PhysParams", "SpectralField", "State", "__version__"]
