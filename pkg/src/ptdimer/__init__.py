"""Simulation of PT-symmetric dimer lattices: spectra, dynamics, transitions."""

__version__ = "0.1.0"
