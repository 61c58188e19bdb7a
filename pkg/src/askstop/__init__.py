"""Simulation and estimation of when askers stop waiting for answers."""

__version__ = "0.1.0"
