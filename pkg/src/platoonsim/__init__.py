"""Simulation of robot groups navigating social-force crowds."""

__version__ = "0.1.0"
