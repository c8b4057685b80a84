"""Simulation, estimation and Cramer-Rao bounds for Rydberg-atom RF sensing."""

__version__ = "0.1.0"
