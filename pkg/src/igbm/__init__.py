"""Interacting geometric Brownian motion market model."""

__version__ = "0.1.0"
