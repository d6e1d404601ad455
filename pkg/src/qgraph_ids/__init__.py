"""Metric graph spectra and integrated densities of states."""

__version__ = "0.1.0"
