"""Amplitude-phase treatment of the one-dimensional Schrodinger equation.

Subpackages are plain modules: :mod:`milne.domain` for potentials, grids and
energy slices, :mod:`milne.schrodinger` for the Numerov basis,
:mod:`milne.ermakov` for the nonlinear amplitude and its phase,
:mod:`milne.spectral` for eigenvalues and accumulated phases,
:mod:`milne.semiclassical` for WKB comparisons and :mod:`milne.cli` for the
command line.
"""

from .domain import EnergySlice, PotentialSpec, SpatialGrid, evaluate_energy_slice, load_config
from .errors import ConfigError, MilneError
from .ermakov import ErmakovParams, amplitude, phase
from .schrodinger import solve_basis
from .spectral import QuantumNumberMap, basis_at, find_eigenvalues, harmonic_map

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "EnergySlice",
    "ErmakovParams",
    "MilneError",
    "PotentialSpec",
    "QuantumNumberMap",
    "SpatialGrid",
    "amplitude",
    "basis_at",
    "evaluate_energy_slice",
    "find_eigenvalues",
    "harmonic_map",
    "load_config",
    "phase",
    "solve_basis",
]
