"""Hyperbolic geometry and Teichmueller state integrals of the twist knots K_n."""
from __future__ import annotations

from .angle_structures import AngleVector, ExtendedAngleVector, initial_structure
from .geometric_solver import CompleteStructure, SolverError, maximize_volume
from .partition_function import (
    ContourSpec,
    MonteCarloRequired,
    PartitionResult,
    QuadratureDiverged,
    evaluate_J,
    evaluate_Jfrak,
    saddle_prediction,
    volume_sweep,
)
from .quantum_dilog import QdilogParams, b_from_hbar, phi_b
from .twist_triangulations import TwistKnotSpec, build_h, build_ideal, build_spec, kernel_data

__all__ = [
    "AngleVector",
    "ExtendedAngleVector",
    "initial_structure",
    "CompleteStructure",
    "SolverError",
    "maximize_volume",
    "ContourSpec",
    "MonteCarloRequired",
    "PartitionResult",
    "QuadratureDiverged",
    "evaluate_J",
    "evaluate_Jfrak",
    "saddle_prediction",
    "volume_sweep",
    "QdilogParams",
    "b_from_hbar",
    "phi_b",
    "TwistKnotSpec",
    "build_h",
    "build_ideal",
    "build_spec",
    "kernel_data",
]
