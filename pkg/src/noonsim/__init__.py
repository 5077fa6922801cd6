"""Desk-scale simulator and tomography toolkit for two-resonator NOON states."""

__version__ = "0.1.0"
