"""Quantization of superconducting circuits with lumped elements, lines and nonreciprocal devices."""

from . import lumped, modes, netlist, nonreciprocal, rabi, symplectic

__version__ = "0.1.0"

__all__ = ["lumped", "modes", "netlist", "nonreciprocal", "rabi", "symplectic", "__version__"]
