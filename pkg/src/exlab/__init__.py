"""Simulation and verification tools for exclusion processes on Z^d and trees."""

__version__ = "0.1.0"
