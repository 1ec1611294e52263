"""Hybrid variance-tree / finite-difference pricer for the Heston model.

A binomial lattice tracks the square-root variance process; at every time
step each variance node propagates the option values along a transformed
log-price grid with a one-dimensional tridiagonal operator (implicit away
from zero variance, explicit upwind near it).  Supports European, American
and up-and-out barrier options, with a characteristic-function benchmark
and diagnostics that verify the scheme's stochasticity and local-moment
identities.
"""

from ._kernels import BACKEND_ENV, available_backends, resolve_backend
from .analytic import (
    CfQuadrature,
    QuadratureError,
    black_scholes_put,
    convergence_ratio,
    heston_call_cf,
    heston_put_cf,
)
from .fd import (
    BoundaryKind,
    Coeffs,
    GridPolicy,
    Regime,
    StabilityViolation,
    TridiagOperator,
    YGrid,
    apply_explicit,
    build_grid,
    build_operator,
    coeffs,
    default_thresholds,
    feasible_eps_window,
    select_regime,
    thomas_solve,
)
from .model import HestonParams, drift_coeffs, mu_v, mu_y, s_of, to_y
from .pricing import (
    ExerciseStyle,
    OptionKind,
    OptionSpec,
    PriceResult,
    UpOutBarrier,
    ValueSurface,
    backward_step,
    obstacle,
    price,
    terminal_surface,
)
from .vol_tree import DegenerateLatticeError, NodeMatch, VolLattice, build_lattice

__version__ = "0.1.0"

__all__ = [
    "BACKEND_ENV",
    "BoundaryKind",
    "CfQuadrature",
    "Coeffs",
    "DegenerateLatticeError",
    "ExerciseStyle",
    "GridPolicy",
    "HestonParams",
    "NodeMatch",
    "OptionKind",
    "OptionSpec",
    "PriceResult",
    "QuadratureError",
    "Regime",
    "StabilityViolation",
    "TridiagOperator",
    "UpOutBarrier",
    "ValueSurface",
    "VolLattice",
    "YGrid",
    "apply_explicit",
    "available_backends",
    "backward_step",
    "black_scholes_put",
    "build_grid",
    "build_lattice",
    "build_operator",
    "coeffs",
    "convergence_ratio",
    "default_thresholds",
    "drift_coeffs",
    "feasible_eps_window",
    "heston_call_cf",
    "heston_put_cf",
    "mu_v",
    "mu_y",
    "obstacle",
    "price",
    "resolve_backend",
    "s_of",
    "select_regime",
    "terminal_surface",
    "thomas_solve",
    "to_y",
]
