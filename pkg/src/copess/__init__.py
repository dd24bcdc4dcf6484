"""Simulation and analysis toolkit for lattice-modulated inductive tactile surfaces."""

__version__ = "0.1.0"
