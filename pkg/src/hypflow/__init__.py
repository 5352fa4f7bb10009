"""Thermodynamic formalism on automatic structures of hyperbolic groups."""

__version__ = "0.1.0"
