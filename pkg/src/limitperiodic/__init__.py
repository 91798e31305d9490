"""Periodic Schroedinger cocycles, band spectra, and a nested-ball
construction of limit-periodic potentials with small spectrum."""

from .bands import SpectrumDescription, compute_bands, spectrum_measure, verify_norm_measure_bound
from .cocycle import lyapunov_family, lyapunov_periodic, monodromy, transfer
from .errors import (
    ConstructionError,
    DivisibilityError,
    LimitPeriodicError,
    ParameterError,
    ScheduleError,
)
from .odometer import DEFAULT_SCHEDULE, Ball, GroupSchedule, PeriodicPotential, PotentialFamily

__version__ = "0.1.0"

__all__ = [
    "Ball",
    "ConstructionError",
    "DEFAULT_SCHEDULE",
    "DivisibilityError",
    "GroupSchedule",
    "LimitPeriodicError",
    "ParameterError",
    "PeriodicPotential",
    "PotentialFamily",
    "ScheduleError",
    "SpectrumDescription",
    "compute_bands",
    "lyapunov_family",
    "lyapunov_periodic",
    "monodromy",
    "spectrum_measure",
    "transfer",
    "verify_norm_measure_bound",
    "__version__",
]
