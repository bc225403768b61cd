"""Boundary-element realization of layer-potential decompositions of surface vector fields."""

__version__ = "0.1.0"
