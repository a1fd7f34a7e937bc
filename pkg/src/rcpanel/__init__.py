"""Simulation and limit-law toolkit for random-coefficient AR(1) panels."""

__version__ = "0.1.0"
