"""Variational core: energy, Pohozaev functional, the fiber map along
mass-preserving dilations, projection onto the Pohozaev set, multiplier
extraction and region classification.

All fiber algebra runs on the scalar triple (A, B, C) = (seminorm^2, q-norm^q,
critical-norm^(2*)); grids enter only through triple_of and project_pohozaev.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

from .constants import DerivedConstants, ProblemParams
from .grid import Field, dilate, h_half_seminorm_sq, lp_norm
from .numerics import bisect_root

# |P| <= LAMBDA_TOL * max(A, 1) counts as membership in the Pohozaev set.
LAMBDA_TOL = 1e-6
SPHERE_RTOL = 1e-8


class UndefinedFiberError(ValueError):
    """Fiber-map regime undefined: vanishing seminorm or critical term."""


@dataclass(frozen=True)
class FunctionalTriple:
    """Sufficient statistics (A, B, C, mass) for all fiber-map algebra."""

    A: float
    B: float
    C: float
    mass: float

    def __post_init__(self) -> None:
        for name in ("A", "B", "C", "mass"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


def triple_of(u: Field, p: ProblemParams) -> FunctionalTriple:
    """Assemble (A, B, C, mass) from a field."""
    return FunctionalTriple(
        A=h_half_seminorm_sq(u),
        B=lp_norm(u, p.q) ** p.q,
        C=lp_norm(u, p.two_star) ** p.two_star,
        mass=lp_norm(u, 2.0),
    )


def scale_triple(tr: FunctionalTriple, p: ProblemParams, t: float) -> FunctionalTriple:
    """Triple of the dilated field t^(N/2) u(t x): (tA, t^(qg/2) B, t^(2*/2) C)."""
    if t <= 0:
        raise ValueError("dilation factor must be positive")
    return FunctionalTriple(
        A=t * tr.A,
        B=t ** (p.q_gamma_q / 2.0) * tr.B,
        C=t ** (p.two_star / 2.0) * tr.C,
        mass=tr.mass,
    )


def energy(tr: FunctionalTriple, p: ProblemParams) -> float:
    """F = A/2 - (mu/q) B - C/2*."""
    return 0.5 * tr.A - p.mu / p.q * tr.B - tr.C / p.two_star


def limit_energy(tr: FunctionalTriple, p: ProblemParams) -> float:
    """Energy with the critical term removed: I = A/2 - (mu/q) B."""
    return 0.5 * tr.A - p.mu / p.q * tr.B


def pohozaev(tr: FunctionalTriple, p: ProblemParams) -> float:
    """P = A - mu gamma_q B - C; vanishes on every constrained critical point."""
    return tr.A - p.mu * p.gamma_q * tr.B - tr.C


def fiber(tr: FunctionalTriple, p: ProblemParams, t: float) -> tuple[float, float, float]:
    """Fiber map along the dilation orbit and its first two derivatives.

    psi(t)  = (t/2) A - mu t^(qg/2)/q B - t^(2*/2)/2* C
    psi'(t) = A/2 - (mu g/2) t^(qg/2-1) B - t^(2*/2-1)/2 C  = P(t*u)/(2t)
    """
    if t <= 0:
        raise ValueError("fiber parameter must be positive")
    g = p.gamma_q
    eq = p.q_gamma_q / 2.0
    ec = p.two_star / 2.0
    psi = 0.5 * t * tr.A - p.mu / p.q * t**eq * tr.B - t**ec / p.two_star * tr.C
    dpsi = 0.5 * tr.A - 0.5 * p.mu * g * t ** (eq - 1.0) * tr.B - 0.5 * t ** (ec - 1.0) * tr.C
    ddpsi = (
        -0.5 * p.mu * g * (eq - 1.0) * t ** (eq - 2.0) * tr.B
        - 0.5 * (ec - 1.0) * t ** (ec - 2.0) * tr.C
    )
    return psi, dpsi, ddpsi


@dataclass(frozen=True)
class FiberCriticalPoints:
    """Critical points of the fiber map: t_plus (local min branch, when the
    subcritical term is active) and t_minus (global max branch).  Both are
    None when the parameters admit no positive critical point."""

    t_plus: Optional[float]
    t_minus: Optional[float]
    inflection: Optional[float]

    @property
    def has_two(self) -> bool:
        return self.t_plus is not None and self.t_minus is not None

    @property
    def empty(self) -> bool:
        return self.t_plus is None and self.t_minus is None


def fiber_critical_points(tr: FunctionalTriple, p: ProblemParams) -> FiberCriticalPoints:
    """Locate the roots of psi' by bracketed bisection.

    With B > 0 the derivative tends to -inf at both ends and has a single
    interior maximum (the unique zero of psi''), so there are either two
    simple roots t_plus < t_minus, a degenerate double root, or none.
    """
    if tr.A <= 0 or tr.C <= 0:
        raise UndefinedFiberError("fiber critical points need A > 0 and C > 0")
    g = p.gamma_q
    eq = p.q_gamma_q / 2.0
    ec = p.two_star / 2.0

    if tr.B == 0.0:
        # Pure critical fiber: psi' decreases through a single root.
        t_minus = (tr.A / tr.C) ** (1.0 / (ec - 1.0))
        return FiberCriticalPoints(t_plus=None, t_minus=t_minus, inflection=None)

    def dpsi(t: float) -> float:
        return fiber(tr, p, t)[1]

    # psi'' = 0 at the unique inflection t0.
    num = -0.5 * p.mu * g * (eq - 1.0) * tr.B
    den = 0.5 * (ec - 1.0) * tr.C
    t0 = (num / den) ** (1.0 / (ec - eq))

    peak = dpsi(t0)
    if peak < 0.0:
        return FiberCriticalPoints(t_plus=None, t_minus=None, inflection=t0)
    if peak == 0.0:
        return FiberCriticalPoints(t_plus=t0, t_minus=t0, inflection=t0)

    lo = t0
    while dpsi(lo) > 0.0:
        lo /= 8.0
        if lo < 1e-280:
            raise ArithmeticError("failed to bracket t_plus")
    hi = t0
    while dpsi(hi) > 0.0:
        hi *= 8.0
        if hi > 1e280:
            raise ArithmeticError("failed to bracket t_minus")
    t_plus = bisect_root(dpsi, lo, t0)
    t_minus = bisect_root(dpsi, t0, hi)
    return FiberCriticalPoints(t_plus=t_plus, t_minus=t_minus, inflection=t0)


def project_pohozaev(
    u: Field, p: ProblemParams, branch: str, *, t_tol: float = 1e-9, max_passes: int = 10
) -> Field:
    """Dilate u to the requested critical point of its fiber map, landing on
    the Pohozaev set of the grid.

    One dilation lands on the ideal-scaling manifold but the grid seminorm of
    the dilated field differs from the scaled value by the torus image term,
    so the projection is iterated; the per-pass contraction is geometric and
    a handful of passes reach the fixed point.
    """
    if branch not in ("plus", "minus"):
        raise ValueError(f"branch must be 'plus' or 'minus', got {branch!r}")
    for _ in range(max_passes):
        cps = fiber_critical_points(triple_of(u, p), p)
        t = cps.t_plus if branch == "plus" else cps.t_minus
        if t is None:
            raise UndefinedFiberError(f"fiber map has no {branch}-branch critical point")
        if abs(t - 1.0) <= t_tol:
            break
        u = dilate(u, t)
    return u


def lagrange_multiplier(u: Field, p: ProblemParams) -> float:
    """lambda = (A - mu B - C) / mass^2."""
    return lagrange_multiplier_of(triple_of(u, p), p)


def lagrange_multiplier_of(tr: FunctionalTriple, p: ProblemParams) -> float:
    if tr.mass <= 0:
        raise ValueError("Lagrange multiplier undefined for zero mass")
    return (tr.A - p.mu * tr.B - tr.C) / tr.mass**2


@dataclass(frozen=True)
class RegionReport:
    """Membership flags on the mass sphere, with the residuals that decided them.

    lambda_sign is "plus" (F < 0) or "minus" (F > 0) and only meaningful when
    in_Lambda holds; in_W is None when the fiber map has no max-branch
    critical point, in which case membership is undefined rather than guessed.
    """

    in_sphere: bool
    in_V: bool
    in_Lambda: bool
    lambda_sign: Optional[str]
    in_W: Optional[bool]
    in_E: bool
    residuals: dict[str, float]

    def to_json(self) -> str:
        payload = {
            "in_sphere": self.in_sphere,
            "in_V": self.in_V,
            "in_Lambda": self.in_Lambda,
            "lambda_sign": self.lambda_sign,
            "in_W": self.in_W,
            "in_E": self.in_E,
            "residuals": self.residuals,
        }
        return json.dumps(payload, indent=2, sort_keys=True)


def classify_region(
    u: Field,
    p: ProblemParams,
    consts: DerivedConstants,
    m_a: float,
) -> RegionReport:
    """Classify u against the sphere, trust region, Pohozaev set, max-branch
    funnel W and the low-energy set E."""
    tr = triple_of(u, p)
    return classify_region_of(tr, p, consts, m_a)


def classify_region_of(
    tr: FunctionalTriple,
    p: ProblemParams,
    consts: DerivedConstants,
    m_a: float,
) -> RegionReport:
    f_val = energy(tr, p)
    p_val = pohozaev(tr, p)
    sphere_res = abs(tr.mass - p.a) / p.a
    lambda_res = abs(p_val) / max(tr.A, 1.0)

    in_sphere = sphere_res <= SPHERE_RTOL
    in_v = tr.A < consts.rho0**2
    in_lambda = lambda_res <= LAMBDA_TOL
    lambda_sign: Optional[str]
    if f_val < 0:
        lambda_sign = "plus"
    elif f_val > 0:
        lambda_sign = "minus"
    else:
        lambda_sign = None

    in_w: Optional[bool]
    try:
        cps = fiber_critical_points(tr, p)
        in_w = None if cps.t_minus is None else bool(cps.t_minus > 1.0)
    except UndefinedFiberError:
        in_w = None

    return RegionReport(
        in_sphere=in_sphere,
        in_V=in_v,
        in_Lambda=in_lambda,
        lambda_sign=lambda_sign,
        in_W=in_w,
        in_E=f_val < 2.0 * m_a,
        residuals={
            "sphere_rel": sphere_res,
            "pohozaev_rel": lambda_res,
            "energy": f_val,
            "pohozaev": p_val,
            "seminorm_sq": tr.A,
            "mass": tr.mass,
        },
    )
