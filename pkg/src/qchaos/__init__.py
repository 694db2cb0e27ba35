"""Numerical laboratory for quantum-chaos diagnostics, continuous-measurement
tomography, DQC1 circuits and concentration of measure."""

__version__ = "0.1.0"

__all__ = ["__version__"]
