"""Simulation and statistics for nonlocality tests in the triangle network."""

__version__ = "0.1.0"
