"""Experiments with GC0(k) circuits: switching, depth reduction, PRGs, Fourier tails."""

__version__ = "0.1.0"
