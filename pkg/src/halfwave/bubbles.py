"""Algebraic-decay extremal bubbles, their truncation, small-scale norm
asymptotics, and the explicit low-mountain path that certifies the strict
max-level bound below m(a) + S^N/(2N)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .constants import DerivedConstants, ProblemParams
from .functionals import FunctionalTriple, energy, triple_of
from .grid import Field, Grid, l2_inner, lp_norm, sqrt_laplacian, translate
from .numerics import bisect_root, fit_residual, golden_section_max, loglog_slope


@dataclass(frozen=True)
class BubbleSpec:
    """Scale and cutoff data for the extremal bubble family."""

    epsilon: float
    amplitude: float = 1.0
    cutoff_inner: float = 1.0
    cutoff_outer: float = 2.0

    def __post_init__(self) -> None:
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if not (0 < self.cutoff_inner < self.cutoff_outer):
            raise ValueError("need 0 < cutoff_inner < cutoff_outer")


def canonical_amplitude(dim: int) -> float:
    """Amplitude (N-1)^((N-1)/2) at which the epsilon=1 bubble solves
    sqrt(-Lap)u = u^(2*-1), making its seminorm and critical norm equal S^N.
    Equals 1 for N = 2."""
    return float((dim - 1.0) ** ((dim - 1.0) / 2.0))


def _smoothstep_cutoff(r: np.ndarray, r1: float, r2: float) -> np.ndarray:
    """Radially decreasing C^2 cutoff: 1 on r <= r1, 0 on r >= r2,
    1 - s^3(10 - 15 s + 6 s^2) on the transition with s = (r - r1)/(r2 - r1)."""
    s = np.clip((r - r1) / (r2 - r1), 0.0, 1.0)
    return 1.0 - s**3 * (10.0 - 15.0 * s + 6.0 * s**2)


def bubble(grid: Grid, spec: BubbleSpec, with_cutoff: bool = True) -> Field:
    """Sample the bubble amplitude * eps^((N-1)/2) / (eps^2 + |x|^2)^((N-1)/2),
    optionally truncated by the radial cutoff."""
    if grid.box_length < 4.0 * spec.cutoff_outer:
        raise ValueError(
            f"box length {grid.box_length:g} too small for cutoff radius {spec.cutoff_outer:g}"
        )
    r2 = grid.radius_sq()
    e = spec.epsilon
    power = (grid.dim - 1.0) / 2.0
    vals = spec.amplitude * e**power / (e**2 + r2) ** power
    if with_cutoff:
        vals = vals * _smoothstep_cutoff(np.sqrt(r2), spec.cutoff_inner, spec.cutoff_outer)
    return Field(grid, np.ascontiguousarray(vals))


@dataclass
class BubbleAsymptotics:
    """Norm deficits of the truncated bubble over an epsilon list with the
    fitted small-scale exponents."""

    epsilons: list[float]
    excluded: list[float]
    seminorm_deficit: list[float]
    critical_deficit: list[float]
    mass_sq: list[float]
    q_norm_pow: list[float]
    slope_seminorm_deficit: float
    slope_critical_deficit: float
    slope_q_norm: float
    mass_log_fit_residual: float
    mass_plain_fit_residual: float

    def rows(self) -> list[dict[str, float]]:
        out = []
        for i, e in enumerate(self.epsilons):
            out.append(
                {
                    "epsilon": e,
                    "seminorm_sq_deficit": self.seminorm_deficit[i],
                    "critical_norm_deficit": self.critical_deficit[i],
                    "mass_sq": self.mass_sq[i],
                    "q_norm_pow_q": self.q_norm_pow[i],
                }
            )
        return out


def bubble_asymptotics(
    grid: Grid,
    p: ProblemParams,
    epsilons: Sequence[float],
    sobolev: float,
) -> BubbleAsymptotics:
    """Measure (A - S^N, C - S^N, mass^2, B) for the canonically scaled
    truncated bubble over a decreasing epsilon list and fit the small-scale
    exponents.  Scales finer than 4 grid spacings are excluded from the fits.

    Expected exponents: N-1 for the seminorm deficit, N for the critical-norm
    deficit, N - (N-1)q/2 for the q-norm; the mass obeys eps*|log eps| in
    dimension 2 and eps above.
    """
    eps_sorted = sorted(set(float(e) for e in epsilons), reverse=True)
    usable = [e for e in eps_sorted if e >= 4.0 * grid.spacing]
    excluded = [e for e in eps_sorted if e < 4.0 * grid.spacing]
    if len(usable) < 3:
        raise ValueError("need at least three resolvable epsilon values for slope fits")

    target = sobolev**grid.dim
    amp = canonical_amplitude(grid.dim)
    a_def, c_def, m_sq, b_pow = [], [], [], []
    for e in usable:
        u = bubble(grid, BubbleSpec(epsilon=e, amplitude=amp), with_cutoff=True)
        tr = triple_of(u, p)
        a_def.append(tr.A - target)
        c_def.append(tr.C - target)
        m_sq.append(tr.mass**2)
        b_pow.append(tr.B)

    eps_arr = np.asarray(usable)
    log_weight = eps_arr * np.abs(np.log(eps_arr))
    return BubbleAsymptotics(
        epsilons=usable,
        excluded=excluded,
        seminorm_deficit=a_def,
        critical_deficit=c_def,
        mass_sq=m_sq,
        q_norm_pow=b_pow,
        slope_seminorm_deficit=loglog_slope(usable, a_def),
        slope_critical_deficit=loglog_slope(usable, c_def),
        slope_q_norm=loglog_slope(usable, b_pow),
        mass_log_fit_residual=fit_residual(log_weight, np.asarray(m_sq)),
        mass_plain_fit_residual=fit_residual(eps_arr, np.asarray(m_sq)),
    )


def coupling_bound(bubble_triple: FunctionalTriple) -> float:
    """Upper bound max(1, mass^2) used for the cross seminorm term."""
    return max(1.0, bubble_triple.mass**2)


def path_upper_envelope(
    t: float, bubble_triple: FunctionalTriple, p: ProblemParams
) -> float:
    """Envelope I(t) = t * coupling + t^2/2 A - mu t^q/q B - t^(2*)/2* C
    dominating the energy increment along the bubble direction."""
    tb = bubble_triple
    return (
        t * coupling_bound(tb)
        + 0.5 * t**2 * tb.A
        - p.mu / p.q * t**p.q * tb.B
        - t**p.two_star / p.two_star * tb.C
    )


def find_t1(bubble_triple: FunctionalTriple, p: ProblemParams, m_a: float) -> float:
    """Smallest t1 with I(t) <= 2 m(a) for every t >= t1 (the envelope is
    eventually decreasing, so t1 is its last crossing of the level 2 m(a))."""
    if m_a >= 0:
        raise ValueError("find_t1 requires a negative ground energy")
    level = 2.0 * m_a

    def gap(t: float) -> float:
        return path_upper_envelope(t, bubble_triple, p) - level

    # March out to the last sign change: beyond the envelope peak the gap is
    # strictly decreasing, so the final crossing is bracketed by scanning.
    t_hi = 1.0
    while gap(t_hi) > 0.0:
        t_hi *= 2.0
        if t_hi > 1e12:
            raise ArithmeticError("envelope never fell below 2 m(a)")
    ts = np.linspace(0.0, t_hi, 4097)[1:]
    vals = np.array([gap(t) for t in ts])
    positive = np.nonzero(vals > 0.0)[0]
    if positive.size == 0:
        # Envelope below the level everywhere: every t qualifies.
        return float(ts[0])
    last = positive[-1]
    return float(bisect_root(gap, ts[last], ts[last + 1], rtol=1e-9))


def find_t0(bubble_triple: FunctionalTriple, p: ProblemParams, sobolev: float) -> float:
    """Largest t below which the envelope stays under S^N/(4N): first crossing
    of I(t) = S^N/(4N), located by bisection."""
    level = sobolev**p.dim / (4.0 * p.dim)

    def gap(t: float) -> float:
        return path_upper_envelope(t, bubble_triple, p) - level

    t_hi = 1e-6
    while gap(t_hi) < 0.0:
        t_hi *= 2.0
        if t_hi > 1e12:
            raise ArithmeticError("envelope never reached S^N/(4N)")
    return float(bisect_root(gap, t_hi / 2.0, t_hi, rtol=1e-9))


def find_offset(ground_field: Field, bubble_field: Field, t1: float) -> np.ndarray:
    """Translation offset y, marched outward along the first axis, at which
    both separation inequalities hold:

      2 <ground(.-y), U>            <=  t1 |U|_2^2
      <ground(.-y), sqrt(-Lap) U>   <=  |U|_2^2
    """
    g = ground_field.grid
    if bubble_field.grid != g:
        raise ValueError("fields live on different grids")
    mass_sq = lp_norm(bubble_field, 2.0) ** 2
    half_lap_bubble = sqrt_laplacian(bubble_field)
    h = g.spacing
    max_shift = g.box_length / 2.0 - 2.0
    if max_shift <= 0:
        raise ValueError("box too small to separate the profiles; enlarge L")

    steps = int(np.floor(max_shift / h))
    for k in range(0, steps + 1):
        d = k * h
        y = np.zeros(g.dim)
        y[0] = d
        shifted = translate(ground_field, y) if d else ground_field
        overlap = l2_inner(shifted, bubble_field)
        cross = l2_inner(shifted, half_lap_bubble)
        if 2.0 * overlap <= t1 * mass_sq and cross <= mass_sq:
            return y
    raise ValueError(
        f"no admissible offset up to |y| = {max_shift:g}; the box is too small, enlarge L"
    )


@dataclass(frozen=True)
class MPPathConfig:
    """Data defining one explicit path u(.-y) + t U_eps, t in [0, t1]."""

    t1: float
    t0: float
    epsilons: tuple[float, ...]
    offsets: tuple[tuple[float, ...], ...]
    a_n: tuple[float, ...]

    def __post_init__(self) -> None:
        if not (0.0 < self.t0 < self.t1):
            raise ValueError("need 0 < t0 < t1")
        for a in self.a_n:
            if a <= 0:
                raise ValueError("reduced masses must be positive")


@dataclass
class MPBoundResult:
    """Maximum of the path energy and its margin below m(a) + S^N/(2N)."""

    max_energy: float
    argmax_t: float
    margin: float
    endpoint_energy: float
    max_path_mass: float
    early_segment_max: float
    late_segment_max: float
    trace_t: list[float] = field(default_factory=list)
    trace_energy: list[float] = field(default_factory=list)


def reduced_mass(p: ProblemParams, t1: float, bubble_triple: FunctionalTriple) -> float:
    """a_n with a_n^2 = a^2 - 2 t1^2 |U|_2^2; must stay in [a/2, a)."""
    a_n_sq = p.a**2 - 2.0 * t1**2 * bubble_triple.mass**2
    if a_n_sq <= 0:
        raise ValueError("bubble mass too large: reduced mass would be imaginary")
    a_n = float(np.sqrt(a_n_sq))
    if not (p.a / 2.0 <= a_n < p.a):
        raise ValueError(f"reduced mass {a_n:g} outside [a/2, a) for a={p.a:g}")
    return a_n


def mp_upper_bound(
    ground_at_an: Field,
    bubble_field: Field,
    p: ProblemParams,
    consts: DerivedConstants,
    m_a: float,
    cfg: MPPathConfig,
    offset: Optional[np.ndarray] = None,
    samples: int = 257,
) -> MPBoundResult:
    """Evaluate the path energy on a dense t-grid over [0, t1], refine the
    maximum by golden section (1e-8 in t), and report the margin
    m(a) + S^N/(2N) - max, which certifies the strict bound when positive."""
    g = ground_at_an.grid
    if bubble_field.grid != g:
        raise ValueError("fields live on different grids")
    y = np.asarray(offset if offset is not None else cfg.offsets[0], dtype=float)
    shifted = translate(ground_at_an, y) if np.any(y) else ground_at_an

    # The seminorm part of the path energy is quadratic in t; precompute it.
    a_ground = l2_inner(shifted, sqrt_laplacian(shifted))
    a_bubble = l2_inner(bubble_field, sqrt_laplacian(bubble_field))
    cross_semi = l2_inner(shifted, sqrt_laplacian(bubble_field))
    mass_ground_sq = lp_norm(shifted, 2.0) ** 2
    mass_bubble_sq = lp_norm(bubble_field, 2.0) ** 2
    cross_mass = l2_inner(shifted, bubble_field)
    vol = g.cell_volume
    uv, bv = shifted.values, bubble_field.values

    def path_energy(t: float) -> float:
        a_val = a_ground + 2.0 * t * cross_semi + t**2 * a_bubble
        w = np.abs(uv + t * bv)
        b_val = float(np.sum(w**p.q)) * vol
        c_val = float(np.sum(w**p.two_star)) * vol
        return 0.5 * a_val - p.mu / p.q * b_val - c_val / p.two_star

    def path_mass(t: float) -> float:
        return float(np.sqrt(mass_ground_sq + 2.0 * t * cross_mass + t**2 * mass_bubble_sq))

    ts = np.linspace(0.0, cfg.t1, samples)
    es = np.array([path_energy(t) for t in ts])
    masses = np.array([path_mass(t) for t in ts])
    i_max = int(np.argmax(es))
    lo = ts[max(i_max - 1, 0)]
    hi = ts[min(i_max + 1, samples - 1)]
    argmax_t, max_energy = golden_section_max(path_energy, lo, hi, xtol=1e-8)
    if es[i_max] > max_energy:
        argmax_t, max_energy = float(ts[i_max]), float(es[i_max])

    early = float(np.max(es[ts <= cfg.t0])) if np.any(ts <= cfg.t0) else -np.inf
    late_mask = (ts >= cfg.t0) & (ts <= cfg.t1)
    late = float(np.max(es[late_mask])) if np.any(late_mask) else -np.inf

    level = m_a + consts.sobolev**p.dim / (2.0 * p.dim)
    return MPBoundResult(
        max_energy=float(max_energy),
        argmax_t=float(argmax_t),
        margin=float(level - max_energy),
        endpoint_energy=float(es[-1]),
        max_path_mass=float(np.max(masses)),
        early_segment_max=early,
        late_segment_max=late,
        trace_t=[float(t) for t in ts],
        trace_energy=[float(e) for e in es],
    )
