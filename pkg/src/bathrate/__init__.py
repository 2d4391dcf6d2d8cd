"""Tunnelling relaxation rates of a two-level system in oscillator and spin baths."""

__version__ = "0.1.0"
