"""Bernoulli factories driven by simulated quantum coins."""

__version__ = "0.1.0"
