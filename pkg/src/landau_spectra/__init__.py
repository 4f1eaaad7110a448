"""Discrete spectrum of the planar Landau Hamiltonian with an expanding potential."""

from .errors import (AccuracyError, DegenerateShiftError, DomainError, GapViolationError,
                     InfiniteMeasureError, LandauSpectraError, ShapeError, UnsupportedError)
from .landau import BasisSlice, LandauModel, landau_level
from .potentials import (AnnulusStep, Gaussian, GridSampled, RadialStep, SectorTile, Sum,
                         potential_from_dict, potential_to_dict)
from .hamiltonian import count_window, j_convergence, validate_window
from .levelset import level_mass, measure_between, script_A, script_B, sup_measure

__version__ = "0.1.0"

__all__ = [
    "AccuracyError", "DegenerateShiftError", "DomainError", "GapViolationError",
    "InfiniteMeasureError", "LandauSpectraError", "ShapeError", "UnsupportedError",
    "BasisSlice", "LandauModel", "landau_level",
    "AnnulusStep", "Gaussian", "GridSampled", "RadialStep", "SectorTile", "Sum",
    "potential_from_dict", "potential_to_dict",
    "count_window", "j_convergence", "validate_window",
    "level_mass", "measure_between", "script_A", "script_B", "sup_measure",
]
