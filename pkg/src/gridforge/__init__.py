"""Transmission network models and optimal power flow from open map data."""

__version__ = "0.1.0"
