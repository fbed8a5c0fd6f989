"""Hermite-spectral simulator for a renormalized stochastic Gross-Pitaevskii
equation on the plane, with samplers and cross-checks for its invariant
Gibbs measure."""

from .hermite import BasisTable, GridField, SpectralField
from .gaussian import NoiseParams

__version__ = "0.1.0"

__all__ = ["BasisTable", "GridField", "SpectralField", "NoiseParams"]
