"""Frames of translates on simple model sets: generation, Poisson summation,
bracket products and frame certificates."""

__version__ = "0.1.0"
