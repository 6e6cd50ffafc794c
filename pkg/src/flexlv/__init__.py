"""Nonlinear flight-dynamics simulator and classical control workbench for a
flexible space launch vehicle."""

__version__ = "0.1.0"
