"""Iterative solvers: the subcritical soliton profile Q, the Sobolev
extremal and constant, the trust-region ground state, and the max-branch
(mountain-pass type) excited state.

Ground-state flow: explicit Euler on the constrained gradient with L2
renormalization after every step and backtracking on energy increase.  Its
fixed points are exactly the discrete constrained critical points.  The
trust region |u|_{H^(1/2)} < rho0 is enforced literally: escape after the
step-size reduction limit is a detected failure, not a silent projection.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

logger = logging.getLogger(__name__)
_TRACE = bool(os.environ.get("HALFWAVE_TRACE"))

from .constants import DerivedConstants, ProblemParams
from .functionals import (
    FunctionalTriple,
    RegionReport,
    classify_region_of,
    energy,
    fiber,
    fiber_critical_points,
    lagrange_multiplier_of,
    pohozaev,
    triple_of,
)
from .grid import Field, Grid, dilate, lp_norm, make_grid


class SolverError(RuntimeError):
    """Solver failed; the message carries the iteration trace summary."""


class TrustRegionEscape(SolverError):
    """Iterate could not be kept inside the trust region: the requested mass
    exceeds the effective on-grid threshold."""


@dataclass(frozen=True)
class FlowConfig:
    """Iteration controls.  step_size None means 0.01 * grid spacing."""

    step_size: Optional[float] = None
    max_iterations: int = 50000
    tolerance: float = 1e-8
    trust_radius: Optional[float] = None
    seed_spec: str = ""

    def __post_init__(self) -> None:
        if self.step_size is not None and self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass
class SolveResult:
    """Converged field with multiplier, energy and diagnostic residuals."""

    field: Field
    lam: float
    energy: float
    residual_stationarity: float
    residual_pohozaev: float
    iterations: int
    converged: bool
    region: Optional[RegionReport] = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def triple(self) -> FunctionalTriple:
        return self.diagnostics["triple"]


def _gradient(vals: np.ndarray, g: Grid, p: ProblemParams) -> np.ndarray:
    """Unconstrained energy gradient sqrt(-Lap)u - mu|u|^(q-2)u - |u|^(2*-2)u."""
    lin = np.fft.ifftn(g.kmag * np.fft.fftn(vals)).real
    absu = np.abs(vals)
    return lin - p.mu * absu ** (p.q - 2.0) * vals - absu ** (p.two_star - 2.0) * vals


def _stationarity(grad: np.ndarray, vals: np.ndarray, g: Grid) -> float:
    """Relative norm of the sphere-projected gradient."""
    gg = float(np.sum(grad * grad))
    if gg == 0.0:
        return 0.0
    gu = float(np.sum(grad * vals))
    uu = float(np.sum(vals * vals))
    perp_sq = max(gg - gu * gu / uu, 0.0)
    return float(np.sqrt(perp_sq / gg))


def _fiber_direction(vals: np.ndarray, g: Grid) -> np.ndarray:
    """Tangent of the mass-preserving dilation orbit, (N/2) u + x . grad u."""
    d = (g.dim / 2.0) * vals
    spec = np.fft.fftn(vals)
    for axis in range(g.dim):
        shape = [1] * g.dim
        shape[axis] = -1
        dv = np.fft.ifftn(1j * g.k1d.reshape(shape) * spec).real
        d = d + g.x1d.reshape(shape) * dv
    return d


def _dilate_tail_filled(vals: np.ndarray, g: Grid, t: float, power: float) -> np.ndarray:
    """Dilation for the internal branch projection: the frame of samples whose
    preimage t*x leaves the box (empty for t <= 1) is filled with the
    iterate's own algebraic tail c/|t x|^power instead of zeros, so the
    projection does not chop the slow tail and perturb the energy."""
    out = dilate(Field(g, vals), t).values
    if t <= 1.0:
        return out
    half = g.box_length / 2.0
    out1d = np.abs(t * g.x1d) > half
    frame = np.zeros(out.shape, dtype=bool)
    for axis in range(g.dim):
        shape = [1] * g.dim
        shape[axis] = -1
        frame |= out1d.reshape(shape)
    if not np.any(frame):
        return out
    r = np.sqrt(g.radius_sq())
    window = (r >= 0.55 * half) & (r <= 0.75 * half) & (vals > 0)
    if np.count_nonzero(window) < 8:
        return out
    c_tail = float(np.median(vals[window] * r[window] ** power))
    if not np.isfinite(c_tail) or c_tail <= 0:
        return out
    out[frame] = t ** (g.dim / 2.0) * c_tail / (t * r[frame]) ** power
    return out


def _recenter(vals: np.ndarray) -> np.ndarray:
    """Roll the peak of |vals| to the box center (exact integer shift)."""
    n = vals.shape[0]
    peak = np.unravel_index(np.argmax(np.abs(vals)), vals.shape)
    shifts = [n // 2 - idx for idx in peak]
    if any(shifts):
        vals = np.roll(vals, shifts, axis=tuple(range(vals.ndim)))
    return vals


def _reject_degenerate_seed(vals: np.ndarray) -> None:
    if not np.any(vals):
        raise ValueError("zero seed rejected")
    if np.min(vals) < 0 and np.max(vals) > 0:
        if -np.min(vals) > 1e-10 * np.max(vals):
            raise ValueError("sign-changing seed rejected")


def default_q_seed(grid: Grid) -> Field:
    """Radial Gaussian bump used to start the fixed-point iteration for Q."""
    r2 = grid.radius_sq()
    return Field(grid, np.exp(-r2 / 4.0))


def solve_limit_Q(grid: Grid, p: ProblemParams, cfg: FlowConfig, seed: Field | None = None) -> SolveResult:
    """Positive radial profile of sqrt(-Lap)Q + Q = Q^(q-1) by spectral
    renormalization with stabilizing power theta = (q-1)/(q-2); falls back to
    a normalized gradient flow if the residual oscillates."""
    if seed is None:
        seed = default_q_seed(grid)
    if seed.grid != grid:
        raise ValueError("seed lives on a different grid")
    _reject_degenerate_seed(seed.values)

    theta = (p.q - 1.0) / (p.q - 2.0)
    mult = grid.kmag + 1.0
    vals = np.maximum(seed.values, 0.0)
    residual = np.inf
    trace: list[float] = []
    n_total = grid.points_per_dim**grid.dim

    for it in range(1, cfg.max_iterations + 1):
        spec = np.fft.fftn(vals)
        rhs = np.abs(vals) ** (p.q - 2.0) * vals
        rhs_spec = np.fft.fftn(rhs)
        num = float(np.sum(mult * (spec.real**2 + spec.imag**2)))
        den = float(np.sum((spec.conj() * rhs_spec).real))
        if den <= 0 or num <= 0:
            raise SolverError(f"fixed-point iteration collapsed at iteration {it}")
        m_n = num / den
        new_spec = m_n**theta * rhs_spec / mult
        new_vals = np.fft.ifftn(new_spec).real

        lhs = np.fft.ifftn(mult * new_spec).real
        res_num = np.sqrt(np.sum((lhs - np.abs(new_vals) ** (p.q - 2.0) * new_vals) ** 2))
        res_den = np.sqrt(np.sum(new_vals**2))
        residual = float(res_num / res_den)
        trace.append(residual)
        vals = new_vals
        if residual <= cfg.tolerance:
            break
        if len(trace) > 12 and trace[-1] > 2.0 * min(trace[:-1]) and trace[-1] > 10 * cfg.tolerance:
            vals = _limit_gradient_flow(vals, grid, p, cfg)
            spec = np.fft.fftn(vals)
            lhs = np.fft.ifftn(mult * spec).real
            res = lhs - np.abs(vals) ** (p.q - 2.0) * vals
            residual = float(np.sqrt(np.sum(res**2) / np.sum(vals**2)))
            break
    else:
        it = cfg.max_iterations

    if not np.all(np.isfinite(vals)) or float(np.sqrt(np.sum(vals**2) / n_total)) == 0.0:
        raise SolverError(f"fixed-point iteration diverged; residual trace tail {trace[-5:]}")

    q_field = Field(grid, np.ascontiguousarray(vals))
    tr = triple_of(q_field, p)
    # Diagnostics against the stationary identities A = g B = g/(1-g) mass^2.
    g_q = p.gamma_q
    poh_b = abs(tr.A - g_q * tr.B) / tr.A
    poh_m = abs(tr.A - g_q / (1.0 - g_q) * tr.mass**2) / tr.A
    converged = residual <= cfg.tolerance
    return SolveResult(
        field=q_field,
        lam=-1.0,
        energy=0.5 * tr.A + 0.5 * tr.mass**2 - tr.B / p.q,
        residual_stationarity=residual,
        residual_pohozaev=max(poh_b, poh_m),
        iterations=it,
        converged=converged,
        region=None,
        diagnostics={
            "triple": tr,
            "identity_qnorm_rel": poh_b,
            "identity_mass_rel": poh_m,
            "residual_trace_tail": trace[-10:],
        },
    )


def _limit_gradient_flow(
    vals: np.ndarray, grid: Grid, p: ProblemParams, cfg: FlowConfig
) -> np.ndarray:
    """Fallback mass-normalized descent for the Q problem."""
    mass0 = np.sqrt(np.sum(vals**2))
    tau = 0.25 * grid.spacing
    for _ in range(cfg.max_iterations):
        lin = np.fft.ifftn((grid.kmag + 1.0) * np.fft.fftn(vals)).real
        grad = lin - np.abs(vals) ** (p.q - 2.0) * vals
        res = float(np.sqrt(np.sum(grad**2) / np.sum(vals**2)))
        if res <= cfg.tolerance:
            break
        vals = vals - tau * grad
        vals *= mass0 / np.sqrt(np.sum(vals**2))
    return vals


def rayleigh_quotient(u: Field, p: ProblemParams) -> float:
    """Quotient A / C^(2/2*) evaluated in the resolved mean-zero sector,
    the functional solve_sobolev_extremal minimizes."""
    g = u.grid
    mask = g.resolved_projector(keep_mean=False)
    vals = np.fft.ifftn(mask * np.fft.fftn(u.values)).real
    spec = np.fft.fftn(vals)
    vol = g.cell_volume
    a = float(np.sum(g.kmag * (spec.real**2 + spec.imag**2))) * vol / g.points_per_dim**g.dim
    c = float(np.sum(np.abs(vals) ** p.two_star)) * vol
    return a / c ** (2.0 / p.two_star)


@dataclass
class SobolevResult:
    """Outcome of the Rayleigh-quotient minimization."""

    sobolev: float
    extremal: Field
    iterations: int
    converged: bool
    diagnostics: dict = field(default_factory=dict)

    def __iter__(self):
        return iter((self.sobolev, self.extremal))


def solve_sobolev_extremal(
    grid: Grid,
    p: ProblemParams,
    cfg: FlowConfig,
    seed_epsilon: float = 0.5,
    seed: Field | None = None,
) -> SobolevResult:
    """Minimize the Rayleigh quotient A / C^(2/2*) by normalized descent,
    seeded with the algebraic-decay extremal profile at scale seed_epsilon.

    On the torus the quotient degenerates along the null directions of the
    discrete quadratic form (the constant mode and the zeroed Nyquist rows),
    so the minimization runs in the resolved mean-zero sector; for localized
    profiles the restriction changes the quotient only at the box-truncation
    level.
    """
    if seed is None:
        from .bubbles import BubbleSpec, bubble

        seed = bubble(grid, BubbleSpec(epsilon=seed_epsilon), with_cutoff=False)
    if seed.grid != grid:
        raise ValueError("seed lives on a different grid")
    _reject_degenerate_seed(seed.values)

    ts = p.two_star
    vol = grid.cell_volume
    # Two-thirds band limit on top of the resolved sector: without it the
    # descent parks the profile at sub-grid scale where the aliased quadrature
    # undercounts the seminorm and the quotient dips below its true infimum.
    mask = grid.resolved_projector(keep_mean=False)
    cut = (2.0 / 3.0) * np.max(np.abs(grid.k1d))
    for axis in range(grid.dim):
        shape = [1] * grid.dim
        shape[axis] = -1
        mask = mask * (np.abs(grid.k1d) <= cut).astype(float).reshape(shape)

    def project(v: np.ndarray) -> np.ndarray:
        return np.fft.ifftn(mask * np.fft.fftn(v)).real

    vals = project(seed.values)
    vals /= (np.sum(np.abs(vals) ** ts) * vol) ** (1.0 / ts)

    tau = cfg.step_size if cfg.step_size is not None else 0.25 * grid.spacing
    tau_max = 0.6 * grid.spacing
    n_pow = grid.points_per_dim**grid.dim

    def quotient(v: np.ndarray) -> tuple[float, float, float]:
        spec = np.fft.fftn(v)
        a = float(np.sum(grid.kmag * (spec.real**2 + spec.imag**2))) * vol / n_pow
        c = float(np.sum(np.abs(v) ** ts)) * vol
        return a / c ** (2.0 / ts), a, c

    s_val, a_val, c_val = quotient(vals)
    it = 0
    flat_steps = 0
    converged = False
    for it in range(1, cfg.max_iterations + 1):
        lin = np.fft.ifftn(grid.kmag * np.fft.fftn(vals)).real
        grad = project(lin - (a_val / c_val) * np.abs(vals) ** (ts - 2.0) * vals)
        trial = vals - tau * grad
        trial /= (np.sum(np.abs(trial) ** ts) * vol) ** (1.0 / ts)
        s_new, a_new, c_new = quotient(trial)
        if s_new > s_val:
            tau *= 0.5
            if tau < 1e-14:
                break
            continue
        drop = s_val - s_new
        vals, s_val, a_val, c_val = trial, s_new, a_new, c_new
        tau = min(tau * 1.1, tau_max)
        flat_steps = flat_steps + 1 if drop <= cfg.tolerance * max(s_val, 1.0) else 0
        if flat_steps >= 5:
            converged = True
            break

    extremal = Field(grid, np.ascontiguousarray(vals))
    return SobolevResult(
        sobolev=s_val,
        extremal=extremal,
        iterations=it,
        converged=converged,
        diagnostics={"A": a_val, "C": c_val, "final_step": tau},
    )


def sobolev_constant_by_refinement(
    grid: Grid,
    p: ProblemParams,
    cfg: FlowConfig,
    seed_epsilon: float = 0.5,
    levels: int = 3,
) -> SobolevResult:
    """Production estimate of the Sobolev constant: run the Rayleigh
    minimization on a dyadic resolution sequence ending at `grid`, fit the
    observed convergence order, and Richardson-extrapolate.

    The single-grid minimum carries a concentration floor that shrinks like
    a fixed factor per resolution doubling, so the extrapolated limit is far
    more accurate than the finest-grid value; the fitted order and per-level
    values are returned in the diagnostics.
    """
    if levels < 2:
        raise ValueError("need at least two refinement levels")
    n_fine = grid.points_per_dim
    ns = [n_fine // 2**k for k in range(levels - 1, -1, -1)]
    if ns[0] < 16 or any(n % 2 for n in ns):
        raise ValueError(f"resolution sequence {ns} invalid; increase points_per_dim")
    results = []
    for n in ns:
        g = grid if n == n_fine else make_grid(grid.dim, grid.box_length, n)
        results.append(solve_sobolev_extremal(g, p, cfg, seed_epsilon=seed_epsilon))
    s_vals = [r.sobolev for r in results]
    fine = results[-1]
    s_best = s_vals[-1]
    order = float("nan")
    if levels >= 3:
        d1 = s_vals[-3] - s_vals[-2]
        d2 = s_vals[-2] - s_vals[-1]
        if d1 * d2 > 0 and abs(d2) < abs(d1):
            order = np.log2(d1 / d2)
            s_best = s_vals[-1] + d2 / (2.0**order - 1.0)
    elif levels == 2:
        s_best = 2.0 * s_vals[-1] - s_vals[-2]
    return SobolevResult(
        sobolev=float(s_best),
        extremal=fine.extremal,
        iterations=sum(r.iterations for r in results),
        converged=all(r.converged for r in results),
        diagnostics={
            "levels": ns,
            "per_level": s_vals,
            "fitted_order": order,
            "finest": s_vals[-1],
        },
    )


def radial_profile(u: Field) -> tuple[np.ndarray, np.ndarray]:
    """Radial cut of a center-peaked field along the first axis."""
    n = u.grid.points_per_dim
    idx = (n // 2,) * (u.grid.dim - 1)
    vals = u.values[(slice(n // 2, None),) + idx]
    radii = u.grid.x1d[n // 2 :] - u.grid.x1d[n // 2]
    return radii, np.asarray(vals, dtype=float)


def sample_scaled_profile(
    grid: Grid,
    radii: np.ndarray,
    values: np.ndarray,
    amplitude: float,
    scale: float,
    tail_power: float,
) -> Field:
    """Sample amplitude * profile(scale * |x|) on a grid, extending the
    measured radial profile beyond its trustworthy range by the algebraic
    tail c / r^tail_power fitted on the outer half of that range."""
    r_cut = 0.45 * radii[-1]
    window = (radii >= 0.5 * r_cut) & (radii <= r_cut)
    c_tail = float(np.median(values[window] * radii[window] ** tail_power))
    s = scale * np.sqrt(grid.radius_sq())
    inner = np.interp(s, radii, values)
    outer = c_tail / np.maximum(s, r_cut) ** tail_power
    vals = amplitude * np.where(s <= r_cut, inner, outer)
    return Field(grid, np.ascontiguousarray(vals))


def _seed_from_limit_profile(
    grid: Grid, p: ProblemParams, consts: DerivedConstants, q_profile: Field
) -> Field:
    """Scaled soliton alpha Q(beta x), built from the radial profile of Q so
    the (typically much coarser, much larger) target box is filled faithfully
    including the algebraic tail."""
    radii, values = radial_profile(q_profile)
    seed = sample_scaled_profile(
        grid, radii, values, consts.alpha, consts.beta, tail_power=p.dim + 1.0
    )
    mass = lp_norm(seed, 2.0)
    return Field(grid, seed.values * (p.a / mass))


def solve_ground_state(
    grid: Grid,
    p: ProblemParams,
    consts: DerivedConstants,
    cfg: FlowConfig,
    q_profile: Field | None = None,
    seed: Field | None = None,
) -> SolveResult:
    """Trust-region local minimizer of the energy on the mass sphere.

    The descent runs on the min-branch reduction of the energy: each step
    projects the iterate onto the Pohozaev set through the fiber minimum,
    then takes an explicit Euler step along the multiplier-corrected gradient
    with L2 renormalization.  The reduction is what keeps the flow on the
    localized branch: on a finite torus the plain sphere flow drains into a
    near-constant state whose energy (-mu/q a^q L^(N(2-q)/2) + smaller) lies
    below the ground level at any desk-scale box, while such states have no
    fiber critical point at all and so are structurally excluded here.  The
    reduced infimum equals the ground level, so fixed points and the reported
    energy are unchanged.

    The trust region sqrt(A) < rho0 is still enforced literally; escape after
    the step-size reduction limit raises TrustRegionEscape.
    """
    if p.a > consts.a_star * (1.0 + 1e-12):
        raise ValueError(f"mass a={p.a:g} exceeds the threshold a_star={consts.a_star:g}")

    if seed is None:
        if q_profile is None:
            q_cfg = FlowConfig(max_iterations=2000, tolerance=min(cfg.tolerance, 1e-10))
            q_profile = solve_limit_Q(grid, p, q_cfg).field
        seed = _seed_from_limit_profile(grid, p, consts, q_profile)
        # Band-limited interpolation of the spread profile can leave tiny
        # negative ripples; clip them rather than reject our own seed.
        vals = seed.values.copy()
        floor = -1e-6 * float(np.max(vals))
        if float(np.min(vals)) >= floor:
            vals = np.maximum(vals, 0.0)
        seed = Field(grid, vals)
    if seed.grid != grid:
        raise ValueError("seed lives on a different grid")
    _reject_degenerate_seed(seed.values)

    return _branch_descent(
        seed.values, grid, p, consts, cfg, branch="plus", m_a=None, enforce_trust=True
    )


def solve_excited_state(
    grid: Grid,
    p: ProblemParams,
    consts: DerivedConstants,
    m_a: float,
    cfg: FlowConfig,
    ground: Field | None = None,
    bubble_epsilon: float = 0.5,
    bubble_weight: float = 1.0,
    max_restarts: int = 3,
) -> SolveResult:
    """Max-branch critical point by dilation-reduced minimization: project the
    iterate onto the Pohozaev set through the fiber max, then descend along
    the multiplier-corrected gradient on the sphere.

    Collapse onto the ground-state branch (loss of the two-critical-point
    fiber regime) triggers a restart with a larger bubble weight.
    """
    from .bubbles import BubbleSpec, bubble

    if p.a > consts.a_star * (1.0 + 1e-12):
        raise ValueError(f"mass a={p.a:g} exceeds the threshold a_star={consts.a_star:g}")
    if ground is None:
        # The ground state is usually far wider than a bubble-resolving box;
        # the scaled limit profile carries the same mass distribution and is
        # what the seed needs here.
        q_cfg = FlowConfig(max_iterations=2000, tolerance=1e-10)
        q_profile = solve_limit_Q(grid, p, q_cfg).field
        ground = _seed_from_limit_profile(grid, p, consts, q_profile)

    bub = bubble(grid, BubbleSpec(epsilon=bubble_epsilon), with_cutoff=True)
    weight = bubble_weight
    last_error: Exception | None = None
    for _ in range(max_restarts):
        seed_vals = ground.values + weight * bub.values
        try:
            return _branch_descent(
                seed_vals, grid, p, consts, cfg, branch="minus", m_a=m_a, enforce_trust=False
            )
        except _FiberCollapse as exc:
            last_error = exc
            weight *= 2.0
    raise SolverError(f"excited-state flow collapsed after {max_restarts} restarts: {last_error}")


class _FiberCollapse(SolverError):
    pass


def _branch_descent(
    seed_vals: np.ndarray,
    grid: Grid,
    p: ProblemParams,
    consts: DerivedConstants,
    cfg: FlowConfig,
    branch: str,
    m_a: Optional[float],
    enforce_trust: bool,
) -> SolveResult:
    """Descent on the branch-reduced energy u -> psi_u(t_u), t_u the chosen
    fiber critical point.  Fixed points are constrained critical points on
    the corresponding Pohozaev branch.

    The reduced energy driving the line search is evaluated from the scalar
    triple algebra, which is exact along the dilation orbit; the field itself
    is dilated only when the gradient must be sampled away from t = 1, so the
    interpolation noise of repeated dilations never enters the acceptance
    test.
    """
    vol = grid.cell_volume
    mass_sq_target = p.a**2 / vol
    # Steps are taken along the gradient preconditioned by the inverse
    # linearized operator (|xi| + |lambda|)^-1, which equalizes the per-mode
    # contraction rates; the step size is then dimensionless and order one.
    tau = cfg.step_size if cfg.step_size is not None else 1.0
    tau_max = 1.5
    mask = grid.resolved_projector(keep_mean=True)
    rho0 = cfg.trust_radius if cfg.trust_radius is not None else consts.rho0
    want_plus = branch == "plus"
    tail_power = p.dim + 1.0
    # Fiber window within which the iterate counts as sitting on its branch.
    # On the plus branch the iterate is pulled back when it drifts out; the
    # minus-branch iterate concentrates near the resolution scale where field
    # dilations lose fidelity, so there the descent runs entirely on the
    # (exact) triple algebra and the landing projection happens once at the
    # end.
    skip_tol = 1e-4 if want_plus else np.inf

    def normalize(v: np.ndarray) -> np.ndarray:
        v = np.fft.ifftn(mask * np.fft.fftn(v)).real
        return v * np.sqrt(mass_sq_target / np.sum(v * v))

    def precondition(g: np.ndarray, lam: float) -> np.ndarray:
        shift = max(abs(lam), 1e-3)
        return np.fft.ifftn(mask * np.fft.fftn(g) / (grid.kmag + shift)).real

    def reduced(tr: FunctionalTriple) -> tuple[float, float]:
        """(reduced energy, branch critical point) from the triple alone."""
        cps = fiber_critical_points(tr, p)
        t = cps.t_plus if want_plus else cps.t_minus
        if t is None:
            raise _FiberCollapse(f"fiber {branch}-branch critical point vanished")
        return fiber(tr, p, t)[0], t

    def reproject(v: np.ndarray, t: float) -> tuple[np.ndarray, FunctionalTriple, float, float]:
        w = normalize(_dilate_tail_filled(v, grid, t, tail_power))
        tr_w = triple_of(Field(grid, w), p)
        phi_w, t_w = reduced(tr_w)
        return w, tr_w, phi_w, t_w

    u_vals = normalize(np.ascontiguousarray(seed_vals, dtype=np.float64))
    tr = triple_of(Field(grid, u_vals), p)
    try:
        phi, t_u = reduced(tr)
        if abs(t_u - 1.0) > skip_tol:
            u_vals, tr, phi, t_u = reproject(u_vals, t_u)
    except _FiberCollapse as exc:
        raise SolverError(f"seed admits no {branch}-branch critical point: {exc}") from exc
    if enforce_trust and t_u * tr.A >= rho0**2:
        raise TrustRegionEscape(
            f"projected seed seminorm {np.sqrt(t_u * tr.A):g} outside trust radius {rho0:g}"
        )
    trust_flags = 0
    energies = [phi]
    it = 0
    converged = False
    stat = np.inf
    # Two descent phases.  "reduced": monotone in the branch-reduced energy
    # psi_u(t_u), structurally protected against leaving the branch; used to
    # enter the basin of the critical point.  "polish": plain energy descent
    # within the basin, where the critical point is a genuine local minimum,
    # so the protection is unnecessary and the far better conditioning of the
    # plain functional applies.  The polish phase reverts if the iterate
    # drifts out of the fiber window.
    mode = "reduced"
    for it in range(1, cfg.max_iterations + 1):
        raw_grad = _gradient(u_vals, grid, p)
        lam = lagrange_multiplier_of(tr, p)
        grad = raw_grad - lam * u_vals
        stat = float(np.sqrt(np.sum(grad**2))) / max(
            float(np.sqrt(np.sum(raw_grad**2))), 1e-300
        )
        if stat <= cfg.tolerance:
            converged = True
            break
        # The polish phase is only sound on the plus branch, where the target
        # is a strict local minimum of the plain energy; on the minus branch
        # the target is a saddle and plain descent would slide off it.
        if want_plus and mode == "reduced" and abs(t_u - 1.0) <= 1e-3:
            mode = "polish"
            phi = energy(tr, p)
        # Preconditioned direction, projected against the dilation direction
        # in the preconditioned metric: the slope stays nonnegative by
        # Cauchy-Schwarz and the step does not ride the iterate's own fiber,
        # so reprojections stay rare.
        step_dir = precondition(grad, lam)
        fib = _fiber_direction(u_vals, grid)
        m_fib = precondition(fib, lam)
        fib_pair = float(np.sum(fib * m_fib))
        if fib_pair > 0:
            step_dir = step_dir - (float(np.sum(grad * m_fib)) / fib_pair) * m_fib
        slope = vol * float(np.sum(grad * step_dir))
        if slope <= 0.0:
            break
        noise = 1e-13 * max(abs(phi), 1.0)

        accepted = False
        for _ in range(60):
            trial = normalize(u_vals - tau * step_dir)
            tr_new = triple_of(Field(grid, trial), p)
            try:
                phi_new, t_new = reduced(tr_new)
                if mode == "polish":
                    phi_new = energy(tr_new, p)
            except _FiberCollapse:
                tau *= 0.5
                if tau < 1e-15:
                    raise
                continue
            if enforce_trust and min(1.0, t_new) * tr_new.A >= rho0**2:
                trust_flags += 1
                tau *= 0.5
                if tau < 1e-15:
                    raise TrustRegionEscape(
                        f"iterate pinned to the trust-region boundary after {it} steps; "
                        f"mass a={p.a:g} is beyond the effective on-grid threshold"
                    )
                continue
            if phi_new > phi - max(1e-4 * tau * slope, 0.0) + noise:
                tau *= 0.5
                if tau < 1e-15:
                    break
                continue
            accepted = True
            break
        if not accepted:
            break
        u_vals, tr, phi, t_u = trial, tr_new, phi_new, t_new
        # Stagnation stop: the reduced energy is the honest progress measure
        # when the stationarity metric is dominated by flat-valley directions.
        if (
            len(energies) > 25
            and energies[-25] - phi <= cfg.tolerance * max(abs(phi), 1.0)
            and not want_plus
        ):
            energies.append(phi)
            break
        if mode == "polish" and abs(t_u - 1.0) > 0.05:
            # Drifted out of the basin window: reproject and re-arm the guard.
            try:
                u_vals, tr, phi, t_u = reproject(u_vals, t_u)
            except _FiberCollapse:
                pass
            mode = "reduced"
        elif mode == "reduced" and abs(t_u - 1.0) > skip_tol:
            try:
                u_vals, tr, phi, t_u = reproject(u_vals, t_u)
            except _FiberCollapse:
                pass
        energies.append(phi)
        tau = min(tau * 1.2, tau_max)
        if _TRACE and it % 50 == 0:
            print(
                f"[{branch} {mode} it={it}] phi={phi:.10f} stat={stat:.3e} "
                f"tau={tau:.3e} t={t_u:.6f}",
                flush=True,
            )
        if it % 100 == 0:
            u_vals = _recenter(u_vals)

    # At a genuinely stationary point the Pohozaev residual vanishes on its
    # own (it is the gradient paired with the dilation direction), so a
    # stat-converged field is returned as-is; otherwise the exit state is
    # landed on the Pohozaev set by iterated projection passes.
    if not converged:
        try:
            for _ in range(8):
                _, t_fin = reduced(tr)
                if abs(t_fin - 1.0) <= 1e-8:
                    break
                u_vals = normalize(_dilate_tail_filled(u_vals, grid, t_fin, tail_power))
                tr = triple_of(Field(grid, u_vals), p)
        except _FiberCollapse:
            pass
    raw_grad = _gradient(u_vals, grid, p)
    lam = lagrange_multiplier_of(tr, p)
    resid = raw_grad - lam * u_vals
    stat = float(np.sqrt(np.sum(resid**2))) / max(
        float(np.sqrt(np.sum(raw_grad**2))), 1e-300
    )

    u = Field(grid, np.ascontiguousarray(u_vals))
    tr = triple_of(u, p)
    lam = lagrange_multiplier_of(tr, p)
    f_val = energy(tr, p)
    poh = abs(pohozaev(tr, p)) / max(tr.A, 1.0)
    _, _, ddpsi_1 = fiber(tr, p, 1.0)
    region = classify_region_of(tr, p, consts, m_a=f_val if m_a is None else m_a)
    if not want_plus and f_val < 1e-3 and m_a is not None and f_val < 0.5 * abs(m_a):
        raise _FiberCollapse(f"flow collapsed toward the ground-state branch (F={f_val:g})")
    return SolveResult(
        field=u,
        lam=lam,
        energy=f_val,
        residual_stationarity=stat,
        residual_pohozaev=poh,
        iterations=it,
        converged=converged,
        region=region,
        diagnostics={
            "triple": tr,
            "ddpsi_at_1": ddpsi_1,
            "energy_trace": energies,
            "trust_flags": trust_flags,
            "final_step": tau,
            "branch": branch,
        },
    )
