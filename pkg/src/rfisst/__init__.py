"""Hypothesis-level FISST multi-object tracking with MCMC hypothesis generation."""

__version__ = "0.1.0"
