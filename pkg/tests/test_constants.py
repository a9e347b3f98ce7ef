import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from halfwave.constants import (
    DerivedConstants,
    NoPositiveWindowError,
    ProblemParams,
    a_star_ordering_gap,
    derive_constants,
    geometry_g,
    geometry_h,
    geometry_phi,
    geometry_psi,
    geometry_roots,
    gn_constant_pow_q,
    sobolev_constant_closed_form,
)

# Synthetic inputs for pure-arithmetic checks; the real values flow through
# the solver-backed fixtures elsewhere.
Q_NORM = 4.0
S_CLOSED = math.sqrt(math.pi)

# Frozen golden outputs at (N=2, q=2.5, mu=1, a=a_star/2) with the synthetic
# inputs above, produced by an independent dense-scan + bisection oracle on
# the printed h formula.
GOLDEN_A_STAR = 1.1176927954798292
GOLDEN_R0 = 0.3478050954952034
GOLDEN_R1 = 2.3145626456678627
GOLDEN_RHO_TILDE = 0.3411089026488296


def params(a=0.5, q=2.5, mu=1.0, dim=2):
    return ProblemParams(dim=dim, q=q, mu=mu, a=a)


@pytest.fixture(scope="module")
def consts_half_astar():
    p0 = params(a=0.1)
    c0 = derive_constants(p0, Q_NORM, S_CLOSED)
    p = p0.with_mass(c0.a_star / 2)
    return p, derive_constants(p, Q_NORM, S_CLOSED)


class TestProblemParams:
    def test_exponents_n2_q25(self):
        p = params()
        assert p.gamma_q == pytest.approx(0.4, abs=0.0)
        assert p.q_gamma_q == pytest.approx(1.0, abs=0.0)
        assert p.two_star == pytest.approx(4.0, abs=0.0)

    @pytest.mark.parametrize("q", [2.0, 3.0, 1.5, 3.4])
    def test_rejects_q_outside_window_n2(self, q):
        with pytest.raises(ValueError):
            params(q=q)

    def test_q_window_depends_on_dim(self):
        ProblemParams(dim=3, q=2.6, mu=1.0, a=0.1)
        with pytest.raises(ValueError):
            ProblemParams(dim=3, q=2.7, mu=1.0, a=0.1)

    @pytest.mark.parametrize("mu,a", [(0.0, 0.1), (-1.0, 0.1), (1.0, 0.0), (1.0, -2.0)])
    def test_rejects_nonpositive(self, mu, a):
        with pytest.raises(ValueError):
            params(mu=mu, a=a)


class TestDerivedConstants:
    def test_mass_exponents_n2_q25(self):
        p = params()
        g, qg = p.gamma_q, p.q_gamma_q
        assert 2 * p.q * (1 - g) / (2 - qg) == pytest.approx(3.0)
        assert 2 * (p.q - 2) / (2 - qg) == pytest.approx(1.0)

    def test_rho0_closed_form_n2_q25(self):
        c = derive_constants(params(), Q_NORM, S_CLOSED)
        assert c.rho0 == pytest.approx(S_CLOSED * math.sqrt(2.0 / 3.0), rel=1e-14)

    def test_k_constant_matches_limit_energy_prefactor(self):
        # K is pinned by m0(a) = -K a^3 at (N=2, q=2.5): the scaled-soliton
        # evaluation gives exactly a^3/(3 |Q|_2).
        c = derive_constants(params(), Q_NORM, S_CLOSED)
        assert c.k_nq == pytest.approx(1.0 / (3.0 * Q_NORM), rel=1e-14)

    def test_m0_and_lambda_bar(self):
        p = params(a=0.7)
        c = derive_constants(p, Q_NORM, S_CLOSED)
        assert c.m0 == pytest.approx(-c.k_nq * 0.7**3, rel=1e-14)
        assert c.m0 < 0
        assert c.lambda_bar0 == pytest.approx(-c.beta, rel=1e-14)

    def test_alpha_beta_reproduce_mass(self):
        # alpha Q(beta x) has mass a by construction: alpha^2 beta^-N |Q|^2 = a^2.
        p = params(a=0.37)
        c = derive_constants(p, Q_NORM, S_CLOSED)
        assert c.alpha**2 * c.beta ** (-p.dim) * Q_NORM**2 == pytest.approx(
            p.a**2, rel=1e-13
        )

    def test_a_star_golden(self):
        c = derive_constants(params(a=0.1), Q_NORM, S_CLOSED)
        assert c.a_star == pytest.approx(GOLDEN_A_STAR, rel=1e-13)

    def test_a_star_mu_power_law(self):
        p = params(a=0.01)
        c1 = derive_constants(p, Q_NORM, S_CLOSED)
        c2 = derive_constants(p.with_mu(0.5), Q_NORM, S_CLOSED)
        expo = 1.0 / (p.q * (1 - p.gamma_q))
        assert c2.a_star / c1.a_star == pytest.approx(2.0**expo, rel=1e-12)
        assert c2.a_star > c1.a_star  # threshold grows as the coupling shrinks

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            derive_constants(params(), -1.0, S_CLOSED)
        with pytest.raises(ValueError):
            derive_constants(params(), Q_NORM, 0.0)

    @settings(max_examples=60, deadline=None)
    @given(
        q=st.floats(min_value=2.05, max_value=2.95),
        mu=st.floats(min_value=0.05, max_value=20.0),
        a=st.floats(min_value=1e-3, max_value=5.0),
    )
    def test_structural_invariants(self, q, mu, a):
        p = ProblemParams(dim=2, q=q, mu=mu, a=a)
        c = derive_constants(p, Q_NORM, S_CLOSED)
        assert 0 < c.gamma_q < 2 / q
        assert c.a_star < c.a_upper_star
        assert c.k_nq > 0
        assert c.m0 < 0
        if a <= c.a_star:
            assert c.rho_tilde < c.rho0

    def test_threshold_ordering_gap_sweep(self):
        for dim in (2, 3):
            q = 2.1
            while q < 2 + 2 / dim - 0.049:
                p = ProblemParams(dim=dim, q=q, mu=1.0, a=0.1)
                assert a_star_ordering_gap(p) < 1.0
                q += 0.2


class TestGeometry:
    def test_h_at_zero(self, consts_half_astar):
        p, c = consts_half_astar
        assert geometry_h(p, c, 0.0) == 0.0

    def test_h_at_rho0_vanishes_at_threshold_mass(self):
        p0 = params(a=0.1)
        c0 = derive_constants(p0, Q_NORM, S_CLOSED)
        p = p0.with_mass(c0.a_star)
        c = derive_constants(p, Q_NORM, S_CLOSED)
        assert abs(geometry_h(p, c, c.rho0)) <= 1e-10 * max(1.0, c.rho0**2)

    def test_h_at_rho0_positive_below_threshold(self, consts_half_astar):
        p, c = consts_half_astar
        assert geometry_h(p, c, c.rho0) > 0

    @settings(max_examples=60, deadline=None)
    @given(rho=st.floats(min_value=0.0, max_value=30.0))
    def test_h_below_g(self, rho, consts_half_astar):
        p, c = consts_half_astar
        assert geometry_h(p, c, rho) <= geometry_g(p, c, rho) + 1e-15

    def test_psi_peak_location(self, consts_half_astar):
        p, c = consts_half_astar
        rhos = np.linspace(1e-3, 3 * c.rho0, 3001)
        vals = [geometry_psi(p, c, r) for r in rhos]
        assert rhos[int(np.argmax(vals))] == pytest.approx(c.rho0, rel=2e-3)

    def test_phi_peak_location(self, consts_half_astar):
        p, c = consts_half_astar
        rhos = np.linspace(1e-3, 3 * c.rho_bar, 3001)
        vals = [geometry_phi(p, c, r) for r in rhos]
        assert rhos[int(np.argmax(vals))] == pytest.approx(c.rho_bar, rel=2e-3)


class TestGeometryRoots:
    def test_golden_roots_at_half_threshold(self, consts_half_astar):
        p, c = consts_half_astar
        r0, r1 = geometry_roots(p, c)
        assert r0 == pytest.approx(GOLDEN_R0, rel=1e-9)
        assert r1 == pytest.approx(GOLDEN_R1, rel=1e-9)
        assert abs(geometry_h(p, c, r0)) <= 1e-12 * max(1.0, c.rho0**2)
        assert abs(geometry_h(p, c, r1)) <= 1e-12 * max(1.0, c.rho0**2)

    def test_ordering_chain(self, consts_half_astar):
        p, c = consts_half_astar
        r0, r1 = geometry_roots(p, c)
        assert c.rho_tilde == pytest.approx(GOLDEN_RHO_TILDE, rel=1e-12)
        assert 0 < c.rho_tilde < r0 < (p.a / c.a_star) * c.rho0 < c.rho0 < r1

    def test_degenerate_at_threshold(self):
        p0 = params(a=0.1)
        c0 = derive_constants(p0, Q_NORM, S_CLOSED)
        p = p0.with_mass(c0.a_star)
        c = derive_constants(p, Q_NORM, S_CLOSED)
        r0, r1 = geometry_roots(p, c)
        assert r0 == pytest.approx(c.rho0, abs=1e-8)
        assert r1 == pytest.approx(c.rho0, abs=1e-8)

    def test_no_window_above_threshold(self):
        p0 = params(a=0.1)
        c0 = derive_constants(p0, Q_NORM, S_CLOSED)
        p = p0.with_mass(1.05 * c0.a_star)
        c = derive_constants(p, Q_NORM, S_CLOSED)
        with pytest.raises(NoPositiveWindowError):
            geometry_roots(p, c)


class TestSobolevClosedForm:
    def test_dimension_two_value(self):
        assert sobolev_constant_closed_form(2) == pytest.approx(math.sqrt(math.pi), rel=1e-15)

    def test_dimension_three_value(self):
        # 2 sqrt(pi) Gamma(2)/Gamma(1) * (Gamma(3/2)/Gamma(3))^(1/3)
        expected = 2 * math.sqrt(math.pi) * (math.gamma(1.5) / 2.0) ** (1.0 / 3.0)
        assert sobolev_constant_closed_form(3) == pytest.approx(expected, rel=1e-15)


class TestGNConstant:
    def test_printed_form_n2_q25(self):
        p = params()
        # [(1-g)/g]^(qg/2) / ((1-g) Q^(q-2)) with g=0.4, qg=1
        expected = math.sqrt(1.5) / (0.6 * Q_NORM**0.5)
        assert gn_constant_pow_q(p, Q_NORM) == pytest.approx(expected, rel=1e-14)
