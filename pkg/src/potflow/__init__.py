"""
potflow: subsonic potential flow in unbounded domains and its far-field decay.

Modules
-------
gas         pressure law, Bernoulli inversion, sound and critical speed
coeffs      coefficients a_ij(grad phi) of the non-divergence equation
farfield    quadratic form Q, comparison function, barriers, Kelvin transform
geometry    exterior and cone domains, compactified axisymmetric meshes
solver      finite-volume Picard solver for airfoil and nozzle flows
oracles     closed-form reference flows and the optimality certificate
postproc    decay fits, multipole coefficients, expansion remainders
experiment  config-driven runs and sweeps (used by the ``potflow`` CLI)
"""

from .errors import (
    ConfigurationError,
    ConservationError,
    DomainError,
    InfeasibleFluxError,
    InsufficientDataError,
    LinearSolveError,
    ModeError,
    NonConvergenceError,
    NotSubsonicError,
    PotflowError,
    SingularPointError,
)
from .gas import GasModel
from .geometry import ConeDomain, ExteriorDomain
from .solver import FlowField, SolverConfig, solve_airfoil, solve_nozzle

__version__ = "0.1.0"

__all__ = [
    "GasModel",
    "ExteriorDomain",
    "ConeDomain",
    "SolverConfig",
    "FlowField",
    "solve_airfoil",
    "solve_nozzle",
    "PotflowError",
    "DomainError",
    "NotSubsonicError",
    "SingularPointError",
    "ConfigurationError",
    "InfeasibleFluxError",
    "InsufficientDataError",
    "ModeError",
    "ConservationError",
    "LinearSolveError",
    "NonConvergenceError",
]
