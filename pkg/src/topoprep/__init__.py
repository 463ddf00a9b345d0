"""Adiabatic preparation of Wen-plaquette topological order on a simulated NMR processor."""

__version__ = "0.1.0"
