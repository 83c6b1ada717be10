"""Relative-velocity D2Q9 lattice Boltzmann toolkit.

Simulates compressible Navier-Stokes flows with a relaxation frame moving
at a configurable velocity field and quantifies the scheme's linear (von
Neumann) and nonlinear (Kelvin-Helmholtz) stability as a function of the
moment basis, relaxation rates, equilibrium, and relative velocity.
"""

from .collision import (
    RelaxationVector,
    UtildePolicy,
    bgk,
    rates_to_viscosity,
    relax,
    trt1,
    trt2,
    viscosity_to_rates,
)
from .equilibrium import (
    EquilibriumKind,
    LatticeConstants,
    feq,
    lattice_constants,
    linearized_equilibrium,
)
from ._version import __version__
from .errors import DegenerateShiftError, NumericalFailureError
from .lattice import Grid, VelocitySet, d2q9, periodic_shift
from .moments import (
    MomentBasis,
    MomentFamily,
    MomentMatrix,
    eval_basis,
    invert,
    moment_matrix,
)
from .simulation import (
    FieldState,
    RunOutcome,
    SchemeConfig,
    init_kelvin_helmholtz,
    macroscopics,
    run_until,
    step,
    vorticity,
)
from .vonneumann import (
    AmplificationMatrix,
    StabilityProblem,
    amplification,
    max_radius_over_k,
    max_stable_speed,
    spectral_radius,
)

__all__ = [
    "AmplificationMatrix",
    "DegenerateShiftError",
    "EquilibriumKind",
    "FieldState",
    "Grid",
    "LatticeConstants",
    "MomentBasis",
    "MomentFamily",
    "MomentMatrix",
    "NumericalFailureError",
    "RelaxationVector",
    "RunOutcome",
    "SchemeConfig",
    "StabilityProblem",
    "UtildePolicy",
    "VelocitySet",
    "amplification",
    "bgk",
    "d2q9",
    "eval_basis",
    "feq",
    "init_kelvin_helmholtz",
    "invert",
    "lattice_constants",
    "linearized_equilibrium",
    "macroscopics",
    "max_radius_over_k",
    "max_stable_speed",
    "moment_matrix",
    "periodic_shift",
    "rates_to_viscosity",
    "relax",
    "run_until",
    "spectral_radius",
    "step",
    "trt1",
    "trt2",
    "viscosity_to_rates",
]
