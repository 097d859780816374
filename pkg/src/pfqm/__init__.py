"""Driven-dissipative polariton condensates with a momentum-dependent effective mass."""

from .dispersion import (
    CavityParams,
    ConstantMass,
    FractionalPower,
    LowerBranchCurvature,
    Tabulated,
    default_cavity_params,
    find_inflection,
    kinetic_prefactor_g,
)
from .spectral import Grid, SpectralField

__version__ = "0.1.0"

__all__ = [
    "CavityParams",
    "ConstantMass",
    "FractionalPower",
    "Grid",
    "LowerBranchCurvature",
    "SpectralField",
    "Tabulated",
    "default_cavity_params",
    "find_inflection",
    "kinetic_prefactor_g",
]
