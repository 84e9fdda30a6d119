"""Radial aggregation-diffusion at the energy-critical exponent.

``u_t = Lap(u^m) - div(u grad c)`` with ``c`` the Riesz potential of order
``2s`` and ``m = 2d/(d+2s)``: kernel assembly (:mod:`riesz`), the explicit
steady family (:mod:`steady`), a positivity-preserving finite-volume solver
(:mod:`solver`), energy and moment diagnostics (:mod:`diagnostics`) and the
acceptance suite behind ``aggdiff verify`` (:mod:`acceptance`).
"""

__version__ = "0.1.0"

from .core import (
    GridMismatchError, ModelParams, ParameterDomainError, Profile, RadialGrid, integrate,
    lp_norm, make_grid, make_params,
)
from .riesz import KernelMatrix, assemble_kernel, cached_kernel, interaction_energy, potential
from .steady import SteadyState, calibrate_amplitude, calibrated_steady, steady_profile
from .diagnostics import (
    DiagnosticRow, Prediction, blowup_margin, free_energy, hls_constant, moment_rhs,
    second_moment,
)
from .solver import (
    Event, InitialData, SchemeIntegrityError, SimConfig, Trajectory, chemical_potential,
    energy_dissipation_check, run, step,
)

__all__ = [
    "GridMismatchError", "ModelParams", "ParameterDomainError", "Profile", "RadialGrid",
    "integrate", "lp_norm", "make_grid", "make_params",
    "KernelMatrix", "assemble_kernel", "cached_kernel", "interaction_energy", "potential",
    "SteadyState", "calibrate_amplitude", "calibrated_steady", "steady_profile",
    "DiagnosticRow", "Prediction", "blowup_margin", "free_energy", "hls_constant",
    "moment_rhs", "second_moment",
    "Event", "InitialData", "SchemeIntegrityError", "SimConfig", "Trajectory",
    "chemical_potential", "energy_dissipation_check", "run", "step",
]
