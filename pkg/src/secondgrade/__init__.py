"""Pseudo-spectral simulator and verification lab for the 3D second-grade fluid
vorticity equations on a periodic box."""

from . import config, diagnostics, evolution, identities, io, profiles, spectral
from .diagnostics import EnergyReport, energy_sample, fit_decay, profile_error
from .evolution import SimParams, SimState, evolve, make_initial_data
from .identities import run_identity_suite
from .spectral import Grid3, make_grid

__version__ = "0.1.0"

__all__ = [
    "config", "diagnostics", "evolution", "identities", "io", "profiles", "spectral",
    "EnergyReport", "energy_sample", "fit_decay", "profile_error",
    "SimParams", "SimState", "evolve", "make_initial_data",
    "run_identity_suite", "Grid3", "make_grid", "__version__",
]
