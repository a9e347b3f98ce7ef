"""Numerical laboratory for normalized standing waves of the energy-critical
half-wave equation: pseudospectral operators, closed-form constants, fiber-map
geometry, ground/excited-state solvers and verification sweeps."""

from .constants import (
    DerivedConstants,
    NoPositiveWindowError,
    ProblemParams,
    derive_constants,
    geometry_h,
    geometry_roots,
    sobolev_constant_closed_form,
)
from .functionals import (
    FunctionalTriple,
    RegionReport,
    classify_region,
    energy,
    fiber,
    fiber_critical_points,
    lagrange_multiplier,
    pohozaev,
    project_pohozaev,
    triple_of,
)
from .grid import (
    Field,
    Grid,
    dilate,
    h_half_seminorm_sq,
    l2_inner,
    lp_norm,
    make_grid,
    sqrt_laplacian,
    translate,
)
from .solvers import (
    FlowConfig,
    SolveResult,
    solve_excited_state,
    solve_ground_state,
    solve_limit_Q,
    solve_sobolev_extremal,
)

__version__ = "0.1.0"

__all__ = [
    "DerivedConstants",
    "Field",
    "FlowConfig",
    "FunctionalTriple",
    "Grid",
    "NoPositiveWindowError",
    "ProblemParams",
    "RegionReport",
    "SolveResult",
    "classify_region",
    "derive_constants",
    "dilate",
    "energy",
    "fiber",
    "fiber_critical_points",
    "geometry_h",
    "geometry_roots",
    "h_half_seminorm_sq",
    "l2_inner",
    "lagrange_multiplier",
    "lp_norm",
    "make_grid",
    "pohozaev",
    "project_pohozaev",
    "solve_excited_state",
    "solve_ground_state",
    "solve_limit_Q",
    "solve_sobolev_extremal",
    "sqrt_laplacian",
    "translate",
    "triple_of",
]
