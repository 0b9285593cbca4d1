"""Spectral simulation of the pseudoconformally transformed Wave-Schroedinger system."""
from .spectral import Field, SpectralGrid
from .trajectory import LogTimeMesh, Trajectory

__all__ = ["Field", "SpectralGrid", "LogTimeMesh", "Trajectory"]
__version__ = "0.1.0"
