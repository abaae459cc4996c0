"""Backstepping synthesis and simulation for coupled hyperbolic-parabolic
PDE systems: state feedback, observers and observer-based compensators."""

__version__ = "0.1.0"

from .grids import Grid, GridFunction, Kernel2D, integrate
from .system import (
    SystemSpec, FormReport, load_system, system_from_dict,
    validate_system, classify_form, compute_transport_times, apply_coupling,
)

__all__ = [
    "Grid", "GridFunction", "Kernel2D", "integrate",
    "SystemSpec", "FormReport", "load_system", "system_from_dict",
    "validate_system", "classify_form", "compute_transport_times",
    "apply_coupling", "__version__",
]
