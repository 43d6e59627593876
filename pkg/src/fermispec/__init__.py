"""Excitation spectra of Fermi gases: subadditive hulls, HFB and exact diagonalization."""
from . import exactdiag, hfb, lattice, quasispectrum

__all__ = ["lattice", "quasispectrum", "hfb", "exactdiag"]
__version__ = "0.1.0"
