"""Exact non-Markovian dynamics of a damped oscillator with modulated parameters."""

from .bath import KernelEvaluator, SpectralDensity, memory_kernel_K, spectral_density, thermal_kernel
from .coefficients import CoefficientTrace, assemble_coefficients
from .correlations import CorrelatorTrace, accumulate_correlators
from .drive import DriveProtocol, KickTrain, delta_kick_schedule, kick_omega, pulse_shape_phi
from .dynamics import FockDensityMatrix, GaussianMoments, evolve_fock, evolve_moments, fidelity
from .errors import (
    AccuracyError,
    ConfigurationError,
    ConsistencyError,
    NumericalError,
    PhysicalityError,
    QuadratureError,
    SingularityError,
    TruncationError,
)
from .propagator import PropagatorSolution, TimeGrid, solve_propagator

__version__ = "0.1.0"

__all__ = [
    "AccuracyError",
    "CoefficientTrace",
    "ConfigurationError",
    "ConsistencyError",
    "CorrelatorTrace",
    "DriveProtocol",
    "FockDensityMatrix",
    "GaussianMoments",
    "KernelEvaluator",
    "KickTrain",
    "NumericalError",
    "PhysicalityError",
    "PropagatorSolution",
    "QuadratureError",
    "SingularityError",
    "SpectralDensity",
    "TimeGrid",
    "TruncationError",
    "accumulate_correlators",
    "assemble_coefficients",
    "delta_kick_schedule",
    "evolve_fock",
    "evolve_moments",
    "fidelity",
    "kick_omega",
    "memory_kernel_K",
    "pulse_shape_phi",
    "solve_propagator",
    "spectral_density",
    "thermal_kernel",
]
