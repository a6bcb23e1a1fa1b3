"""Dirac field scattering off commutative and Moyal-deformed potentials."""

__version__ = "0.1.0"
