"""Closed-form constants and scalar geometry of the constrained problem.

Everything here is exact arithmetic on the problem parameters (N, q, mu, a)
plus two measured inputs: the mass of the subcritical soliton profile Q and
the fractional Sobolev constant S.  The scalar landscape function h_a and its
companions g_a, phi_a, psi_a drive the mass-threshold geometry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .numerics import bisect_root, expand_bracket_up


class NoPositiveWindowError(ValueError):
    """h_a has no positive window: the mass exceeds the admissible threshold."""


@dataclass(frozen=True)
class ProblemParams:
    """Problem data (N, q, mu, a) with the subcritical-exponent requirement
    2 < q < 2 + 2/N enforced strictly."""

    dim: int
    q: float
    mu: float
    a: float

    def __post_init__(self) -> None:
        if self.dim < 2:
            raise ValueError(f"dim must be >= 2, got {self.dim}")
        qmax = 2.0 + 2.0 / self.dim
        if not (2.0 < self.q < qmax):
            raise ValueError(
                f"q must lie strictly in (2, {qmax:g}) for N={self.dim}, got {self.q}"
            )
        if not (self.mu > 0):
            raise ValueError(f"mu must be positive, got {self.mu}")
        if not (self.a > 0):
            raise ValueError(f"a must be positive, got {self.a}")

    @property
    def gamma_q(self) -> float:
        return self.dim * (self.q - 2.0) / self.q

    @property
    def two_star(self) -> float:
        return 2.0 * self.dim / (self.dim - 1.0)

    @property
    def q_gamma_q(self) -> float:
        return self.q * self.gamma_q

    def with_mass(self, a: float) -> "ProblemParams":
        return ProblemParams(self.dim, self.q, self.mu, a)

    def with_mu(self, mu: float) -> "ProblemParams":
        return ProblemParams(self.dim, self.q, mu, self.a)


@dataclass(frozen=True)
class DerivedConstants:
    """All closed-form constants derived from (N, q, mu, a, |Q|_2, S)."""

    gamma_q: float
    two_star: float
    q_norm_of_Q: float
    c_opt: float
    sobolev: float
    rho0: float
    rho_bar: float
    rho_tilde: float
    a_star: float
    a_upper_star: float
    k_nq: float
    m0: float
    lambda_bar0: float
    alpha: float
    beta: float

    def to_dict(self) -> dict[str, float]:
        return {
            "gamma_q": self.gamma_q,
            "two_star": self.two_star,
            "q_norm_of_Q": self.q_norm_of_Q,
            "c_opt": self.c_opt,
            "sobolev": self.sobolev,
            "rho0": self.rho0,
            "rho_bar": self.rho_bar,
            "rho_tilde": self.rho_tilde,
            "a_star": self.a_star,
            "a_upper_star": self.a_upper_star,
            "k_nq": self.k_nq,
            "m0": self.m0,
            "lambda_bar0": self.lambda_bar0,
            "alpha": self.alpha,
            "beta": self.beta,
        }


def sobolev_constant_closed_form(dim: int) -> float:
    """Sharp constant of |u|_{H^(1/2)}^2 >= S |u|_{2*}^2 under the |xi|
    Fourier-multiplier normalization.

    S(N) = 2 sqrt(pi) Gamma((N+1)/2)/Gamma((N-1)/2) * [Gamma(N/2)/Gamma(N)]^(1/N);
    for N = 2 this is sqrt(pi).
    """
    n = float(dim)
    return (
        2.0
        * math.sqrt(math.pi)
        * math.gamma((n + 1.0) / 2.0)
        / math.gamma((n - 1.0) / 2.0)
        * (math.gamma(n / 2.0) / math.gamma(n)) ** (1.0 / n)
    )


def gn_constant_pow_q(p: ProblemParams, q_norm_of_Q: float) -> float:
    """q-th power of the sharp interpolation constant,
    C_opt^q = [(1-g)/g]^(q g/2) / ((1-g) |Q|_2^(q-2))."""
    g = p.gamma_q
    return ((1.0 - g) / g) ** (p.q * g / 2.0) / ((1.0 - g) * q_norm_of_Q ** (p.q - 2.0))


def derive_constants(p: ProblemParams, q_norm_of_Q: float, sobolev: float) -> DerivedConstants:
    """Evaluate every closed-form constant of the problem."""
    if not (q_norm_of_Q > 0) or not (sobolev > 0):
        raise ValueError("q_norm_of_Q and sobolev must be positive")
    g = p.gamma_q
    qg = p.q_gamma_q
    ts = p.two_star
    c_opt_q = gn_constant_pow_q(p, q_norm_of_Q)
    c_opt = c_opt_q ** (1.0 / p.q)

    s_pow = sobolev ** (ts / 2.0)
    rho0 = ((2.0 - qg) * ts * s_pow / (2.0 * (ts - qg))) ** (1.0 / (ts - 2.0))
    rho_bar = ((2.0 - qg) * s_pow / (ts - qg)) ** (1.0 / (ts - 2.0))
    rho_tilde = (2.0 * p.mu / p.q * c_opt_q * p.a ** (p.q * (1.0 - g))) ** (1.0 / (2.0 - qg))

    a_star = (
        p.q
        * (ts - 2.0)
        / (2.0 * p.mu * c_opt_q * (ts - qg))
        * ((2.0 - qg) * ts * s_pow / (2.0 * (ts - qg))) ** ((2.0 - qg) / (ts - 2.0))
    ) ** (1.0 / (p.q * (1.0 - g)))
    a_upper_star = (
        (ts - 2.0)
        / (p.mu * g * c_opt_q * (ts - qg))
        * ((2.0 - qg) * s_pow / (ts - qg)) ** ((2.0 - qg) / (ts - 2.0))
    ) ** (1.0 / (p.q * (1.0 - g)))

    # Coefficient of the limit ground energy m0(a) = -K a^(2q(1-g)/(2-qg)),
    # i.e. the minimal value of A/2 - (mu/q) B on the mass sphere.  Direct
    # evaluation on the scaled soliton pins the prefactor to (2-qg)/(2q(1-g));
    # the same value follows from minimizing the sharp-interpolation lower
    # bound in A.
    k_nq = (
        (2.0 - qg)
        / (2.0 * p.q * (1.0 - g))
        * q_norm_of_Q ** (2.0 * (2.0 - p.q) / (2.0 - qg))
        * p.mu ** (2.0 / (2.0 - qg))
    )
    m0 = -k_nq * p.a ** (2.0 * p.q * (1.0 - g) / (2.0 - qg))
    lambda_bar0 = (
        -(q_norm_of_Q ** (2.0 * (2.0 - p.q) / (2.0 - qg)))
        * p.mu ** (2.0 / (2.0 - qg))
        * p.a ** (2.0 * (p.q - 2.0) / (2.0 - qg))
    )
    beta = (p.mu * p.a ** (p.q - 2.0) / q_norm_of_Q ** (p.q - 2.0)) ** (2.0 / (2.0 - qg))
    alpha = p.a * beta ** (p.dim / 2.0) / q_norm_of_Q

    consts = DerivedConstants(
        gamma_q=g,
        two_star=ts,
        q_norm_of_Q=q_norm_of_Q,
        c_opt=c_opt,
        sobolev=sobolev,
        rho0=rho0,
        rho_bar=rho_bar,
        rho_tilde=rho_tilde,
        a_star=a_star,
        a_upper_star=a_upper_star,
        k_nq=k_nq,
        m0=m0,
        lambda_bar0=lambda_bar0,
        alpha=alpha,
        beta=beta,
    )
    # Structural sanity: these hold for every admissible parameter set.
    if not (0.0 < g < 2.0 / p.q):
        raise ValueError(f"gamma_q = {g} outside (0, 2/q)")
    if not (a_star < a_upper_star):
        raise ValueError("threshold ordering a_star < a_upper_star violated")
    if not (k_nq > 0):
        raise ValueError("k_nq must be positive")
    if p.a <= a_star and not (rho_tilde < rho0):
        raise ValueError("rho_tilde < rho0 violated for admissible mass")
    return consts


def a_star_ordering_gap(p: ProblemParams) -> float:
    """(2*/2)^((2-q g)/(2*-2)) * q g / 2; strictly below 1 iff a_star < a_upper_star."""
    qg = p.q_gamma_q
    ts = p.two_star
    return (ts / 2.0) ** ((2.0 - qg) / (ts - 2.0)) * qg / 2.0


def geometry_h(p: ProblemParams, consts: DerivedConstants, rho: float) -> float:
    """Lower envelope of the constrained energy at seminorm rho:
    h(rho) = rho^2/2 - (mu/q) C_opt^q rho^(q g) a^(q(1-g)) - rho^(2*) / (2* S^(2*/2))."""
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    g = p.gamma_q
    ts = p.two_star
    c_opt_q = consts.c_opt**p.q
    return (
        0.5 * rho**2
        - p.mu / p.q * c_opt_q * rho**p.q_gamma_q * p.a ** (p.q * (1.0 - g))
        - rho**ts / (ts * consts.sobolev ** (ts / 2.0))
    )


def geometry_g(p: ProblemParams, consts: DerivedConstants, rho: float) -> float:
    """Subcritical envelope g(rho) = rho^2/2 - (mu/q) C_opt^q a^(q(1-g)) rho^(q g)."""
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    c_opt_q = consts.c_opt**p.q
    return 0.5 * rho**2 - p.mu / p.q * c_opt_q * p.a ** (p.q * (1.0 - p.gamma_q)) * rho**p.q_gamma_q


def geometry_phi(p: ProblemParams, consts: DerivedConstants, rho: float) -> float:
    """phi(rho) = rho^(2-qg) - rho^(2*-qg)/S^(2*/2); h' = 0 where phi crosses
    mu g C_opt^q a^(q(1-g))."""
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    qg = p.q_gamma_q
    ts = p.two_star
    return rho ** (2.0 - qg) - rho ** (ts - qg) / consts.sobolev ** (ts / 2.0)


def geometry_psi(p: ProblemParams, consts: DerivedConstants, rho: float) -> float:
    """psi(rho) = rho^(2-qg)/2 - rho^(2*-qg)/(2* S^(2*/2)); h > 0 where psi
    exceeds (mu/q) C_opt^q a^(q(1-g))."""
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    qg = p.q_gamma_q
    ts = p.two_star
    return 0.5 * rho ** (2.0 - qg) - rho ** (ts - qg) / (ts * consts.sobolev ** (ts / 2.0))


def geometry_roots(p: ProblemParams, consts: DerivedConstants) -> tuple[float, float]:
    """Zeros (R0, R1) of h on (0, inf), bisection-refined.

    For a < a_star the positive window (R0, R1) is returned with the ordering
    0 < rho_tilde < R0 < (a/a_star) rho0 < rho0 < R1.  At a = a_star the
    window collapses and (rho0, rho0) is returned; above a_star there is no
    positive window and NoPositiveWindowError is raised.
    """
    tol = 1e-12 * max(1.0, consts.rho0**2)
    c_opt_q = consts.c_opt**p.q
    rhs = p.mu * p.gamma_q * c_opt_q * p.a ** (p.q * (1.0 - p.gamma_q))

    # Argmax of h: largest solution of phi(rho) = rhs, bracketed by the peak
    # of phi at rho_bar (phi decreases beyond it).
    def phi_gap(rho: float) -> float:
        return geometry_phi(p, consts, rho) - rhs

    if phi_gap(consts.rho_bar) <= 0.0:
        raise NoPositiveWindowError(
            f"mass a={p.a:g} is beyond the critical-point threshold "
            f"a_upper_star={consts.a_upper_star:g}"
        )
    lo, hi = expand_bracket_up(phi_gap, consts.rho_bar)
    rho_max = bisect_root(phi_gap, lo, hi)
    h_max = geometry_h(p, consts, rho_max)

    if h_max < -tol:
        raise NoPositiveWindowError(
            f"h stays negative (max {h_max:.3e} at rho={rho_max:g}); "
            f"mass a={p.a:g} exceeds a_star={consts.a_star:g}"
        )
    if h_max <= tol:
        return rho_max, rho_max

    def h_of(rho: float) -> float:
        return geometry_h(p, consts, rho)

    r0 = bisect_root(h_of, consts.rho_tilde, rho_max)
    lo, hi = expand_bracket_up(h_of, rho_max)
    r1 = bisect_root(h_of, lo, hi)
    return r0, r1
