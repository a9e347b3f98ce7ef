import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from halfwave.constants import ProblemParams, derive_constants, sobolev_constant_closed_form
from halfwave.functionals import (
    FunctionalTriple,
    UndefinedFiberError,
    classify_region_of,
    energy,
    fiber,
    fiber_critical_points,
    lagrange_multiplier_of,
    limit_energy,
    pohozaev,
    project_pohozaev,
    scale_triple,
    triple_of,
)
from halfwave.grid import Field, field_from_function, make_grid

P2 = ProblemParams(dim=2, q=2.5, mu=1.0, a=0.5)

# Frozen fiber golden values for the triple (1, 0.5, 0.5) at (N=2, q=2.5,
# mu=1), located by an independent dense-scan + bisection oracle.
GOLDEN_T_PLUS = 0.04172261953711952
GOLDEN_T_MINUS = 1.692538522160206
GOLDEN_PSI_MINUS = 0.22798823229349235


def positive_triples():
    return st.builds(
        FunctionalTriple,
        A=st.floats(min_value=1e-3, max_value=50.0),
        B=st.floats(min_value=1e-3, max_value=50.0),
        C=st.floats(min_value=1e-3, max_value=50.0),
        mass=st.floats(min_value=1e-2, max_value=10.0),
    )


def _normalized(g, vals, mass):
    return Field(g, vals * (mass / math.sqrt(np.sum(vals**2) * g.cell_volume)))


@pytest.fixture(scope="module")
def localized_field():
    # Admissible mass: below the threshold a_star ~ 1.51 of the real problem.
    g = make_grid(2, 40.0, 128)
    vals = np.exp(-(g.x1d[:, None] ** 2 + g.x1d[None, :] ** 2) / 2) * (
        1 + 0.3 * np.cos(g.x1d[:, None])
    )
    return _normalized(g, vals, P2.a)


class TestTripleOf:
    def test_zero_field(self):
        g = make_grid(2, 20.0, 32)
        tr = triple_of(Field(g, np.zeros((32, 32))), P2)
        assert (tr.A, tr.B, tr.C, tr.mass) == (0.0, 0.0, 0.0, 0.0)

    def test_gaussian_q_norm(self):
        g = make_grid(2, 40.0, 256)
        u = field_from_function(g, lambda x, y: np.exp(-(x**2 + y**2) / 2))
        tr = triple_of(u, P2)
        # integral of exp(-q |x|^2 / 2) over R^2 is 2 pi / q = 0.8 pi at q = 2.5
        assert tr.B == pytest.approx(0.8 * math.pi, rel=1e-10)

    @settings(max_examples=20, deadline=None)
    @given(c=st.floats(min_value=0.1, max_value=10.0))
    def test_scaling_homogeneity(self, c):
        g = make_grid(2, 20.0, 32)
        rng = np.random.default_rng(11)
        vals = rng.standard_normal((32, 32))
        t1 = triple_of(Field(g, vals), P2)
        t2 = triple_of(Field(g, c * vals), P2)
        assert t2.A == pytest.approx(c**2 * t1.A, rel=1e-11)
        assert t2.B == pytest.approx(c**P2.q * t1.B, rel=1e-11)
        assert t2.C == pytest.approx(c**P2.two_star * t1.C, rel=1e-11)
        assert t2.mass == pytest.approx(c * t1.mass, rel=1e-11)

    def test_rejects_negative_components(self):
        with pytest.raises(ValueError):
            FunctionalTriple(A=-1.0, B=0.0, C=0.0, mass=0.0)


class TestEnergyAndPohozaev:
    def test_zero_triple(self):
        z = FunctionalTriple(0.0, 0.0, 0.0, 0.0)
        assert energy(z, P2) == 0.0
        assert pohozaev(z, P2) == 0.0

    def test_pure_critical_triple(self):
        tr = FunctionalTriple(1.0, 0.0, 1.0, 1.0)
        assert energy(tr, P2) == pytest.approx(0.25)
        assert pohozaev(tr, P2) == pytest.approx(0.0)

    def test_limit_energy_drops_critical_term(self):
        tr = FunctionalTriple(2.0, 1.5, 0.7, 1.0)
        assert limit_energy(tr, P2) == pytest.approx(1.0 - 0.4 * 1.5)
        assert energy(tr, P2) == pytest.approx(limit_energy(tr, P2) - 0.7 / 4)

    def test_energy_dominates_h_envelope_on_localized_fields(self):
        # F >= h_a(sqrt A) holds with the sharp constants; checked on random
        # localized fields renormalized onto the mass sphere.
        from halfwave.constants import geometry_h

        q_norm, sob = 9.8563, sobolev_constant_closed_form(2)
        g = make_grid(2, 60.0, 128)
        rng = np.random.default_rng(5)
        x, y = g.coords()
        envelope = np.exp(-(x**2 + y**2) / (2 * 4.0**2))
        c0 = derive_constants(P2.with_mass(0.1), q_norm, sob)
        a = 0.4 * c0.a_star
        p = P2.with_mass(a)
        consts = derive_constants(p, q_norm, sob)
        for _ in range(100):
            k1, k2 = rng.integers(-3, 4, size=2)
            bump = envelope * (1.0 + 0.5 * np.cos(k1 * x / 3 + k2 * y / 3) * rng.uniform(0.2, 1))
            vals = bump * (a / math.sqrt(np.sum(bump**2) * g.cell_volume))
            tr = triple_of(Field(g, vals), p)
            lhs = energy(tr, p)
            rhs = geometry_h(p, consts, math.sqrt(tr.A))
            assert lhs >= rhs - 1e-9 * max(1.0, abs(rhs))


class TestFiber:
    def test_t_one_is_energy(self):
        tr = FunctionalTriple(2.0, 1.0, 0.5, 1.0)
        psi, _, _ = fiber(tr, P2, 1.0)
        assert psi == pytest.approx(energy(tr, P2), rel=1e-14)

    def test_closed_form_quadratic_fiber(self):
        tr = FunctionalTriple(1.0, 0.0, 1.0, 1.0)
        psi, dpsi, ddpsi = fiber(tr, P2, 1.0)
        assert psi == pytest.approx(0.25)
        assert dpsi == pytest.approx(0.0, abs=1e-15)
        assert ddpsi == pytest.approx(-0.5)
        _, dpsi_half, _ = fiber(tr, P2, 0.5)
        assert dpsi_half == pytest.approx(0.5 - 0.25)

    @settings(max_examples=50, deadline=None)
    @given(tr=positive_triples(), t=st.sampled_from([0.1, 1.0, 10.0]))
    def test_derivative_matches_scaled_pohozaev(self, tr, t):
        _, dpsi, _ = fiber(tr, P2, t)
        scaled = scale_triple(tr, P2, t)
        assert dpsi == pytest.approx(pohozaev(scaled, P2) / (2 * t), rel=1e-14, abs=1e-14)

    @settings(max_examples=40, deadline=None)
    @given(
        tr=positive_triples(),
        s=st.floats(min_value=0.2, max_value=5.0),
        t=st.floats(min_value=0.2, max_value=5.0),
    )
    def test_composition(self, tr, s, t):
        psi_direct, _, _ = fiber(tr, P2, s * t)
        psi_composed, _, _ = fiber(scale_triple(tr, P2, t), P2, s)
        assert psi_composed == pytest.approx(psi_direct, rel=1e-12, abs=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(tr=positive_triples())
    def test_second_derivative_single_sign_change(self, tr):
        ts = np.logspace(-3, 3, 200)
        signs = np.sign([fiber(tr, P2, float(t))[2] for t in ts])
        changes = np.count_nonzero(np.diff(signs[signs != 0]))
        assert changes <= 1

    def test_rejects_nonpositive_t(self):
        tr = FunctionalTriple(1.0, 1.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            fiber(tr, P2, 0.0)


class TestFiberCriticalPoints:
    def test_pure_critical_case(self):
        cps = fiber_critical_points(FunctionalTriple(1.0, 0.0, 1.0, 1.0), P2)
        assert cps.t_plus is None
        assert cps.t_minus == pytest.approx(1.0, rel=1e-14)

    def test_golden_two_root_case(self):
        tr = FunctionalTriple(1.0, 0.5, 0.5, 1.0)
        cps = fiber_critical_points(tr, P2)
        assert cps.t_plus == pytest.approx(GOLDEN_T_PLUS, rel=1e-11)
        assert cps.t_minus == pytest.approx(GOLDEN_T_MINUS, rel=1e-11)
        psi_minus, dpsi_minus, dd_minus = fiber(tr, P2, cps.t_minus)
        _, dpsi_plus, dd_plus = fiber(tr, P2, cps.t_plus)
        assert abs(dpsi_minus) < 1e-12 and abs(dpsi_plus) < 1e-12
        assert dd_plus > 0 > dd_minus
        assert psi_minus == pytest.approx(GOLDEN_PSI_MINUS, rel=1e-12)
        assert cps.t_plus < cps.inflection < cps.t_minus

    def test_no_window_flag(self):
        # Huge subcritical term: derivative stays negative, no critical point.
        cps = fiber_critical_points(FunctionalTriple(1.0, 500.0, 1.0, 1.0), P2)
        assert cps.empty
        assert cps.inflection is not None

    def test_undefined_regime(self):
        with pytest.raises(UndefinedFiberError):
            fiber_critical_points(FunctionalTriple(0.0, 1.0, 1.0, 1.0), P2)
        with pytest.raises(UndefinedFiberError):
            fiber_critical_points(FunctionalTriple(1.0, 1.0, 0.0, 1.0), P2)

    @settings(max_examples=40, deadline=None)
    @given(tr=positive_triples(), t0=st.floats(min_value=0.25, max_value=4.0))
    def test_argmax_invariance_under_scaling(self, tr, t0):
        cps = fiber_critical_points(tr, P2)
        if cps.t_minus is None:
            return
        scaled = scale_triple(tr, P2, t0)
        cps2 = fiber_critical_points(scaled, P2)
        assert cps2.t_minus == pytest.approx(cps.t_minus / t0, rel=1e-10)


class TestProjectPohozaev:
    def test_already_on_manifold(self, localized_field):
        p = P2
        w = project_pohozaev(localized_field, p, "minus")
        tr_w = triple_of(w, p)
        cps = fiber_critical_points(tr_w, p)
        assert cps.t_minus == pytest.approx(1.0, abs=1e-8)
        again = project_pohozaev(w, p, "minus")
        assert np.max(np.abs(again.values - w.values)) < 1e-7 * np.max(np.abs(w.values))

    def test_minus_branch_positive_energy(self, localized_field):
        w = project_pohozaev(localized_field, P2, "minus")
        assert energy(triple_of(w, P2), P2) > 0

    def test_projection_kills_pohozaev_random_fields(self):
        # A concentrated core keeps the max-branch projection resolved.
        g = make_grid(2, 40.0, 256)
        rng = np.random.default_rng(17)
        x, y = g.coords()
        core = np.sqrt(0.3) / np.sqrt(0.09 + x**2 + y**2)
        for _ in range(20):
            width = rng.uniform(1.5, 3.0)
            bump = np.exp(-(x**2 + y**2) / (2 * width**2)) + rng.uniform(0.3, 1.0) * core
            u = _normalized(g, bump, P2.a)
            w = project_pohozaev(u, P2, "minus")
            tr = triple_of(w, P2)
            assert abs(pohozaev(tr, P2)) <= 5e-6 * max(tr.A, 1.0)

    def test_bad_branch_name(self, localized_field):
        with pytest.raises(ValueError):
            project_pohozaev(localized_field, P2, "sideways")


class TestMultiplierAndRegions:
    def test_zero_mass_rejected(self):
        with pytest.raises(ValueError):
            lagrange_multiplier_of(FunctionalTriple(1.0, 1.0, 1.0, 0.0), P2)

    def test_formula(self):
        tr = FunctionalTriple(2.0, 1.0, 0.5, 2.0)
        assert lagrange_multiplier_of(tr, P2) == pytest.approx((2.0 - 1.0 - 0.5) / 4.0)

    def test_energy_decomposition_on_manifold(self):
        # At P = 0: F = A/(2N) - mu (2* - q g)/(q 2*) B.
        p = P2
        g_grid = make_grid(2, 40.0, 128)
        x, y = g_grid.coords()
        u = Field(g_grid, np.exp(-(x**2 + y**2) / 3))
        w = project_pohozaev(u, p, "minus")
        tr = triple_of(w, p)
        expected = tr.A / (2 * p.dim) - p.mu * (p.two_star - p.q_gamma_q) / (
            p.q * p.two_star
        ) * tr.B
        assert energy(tr, p) == pytest.approx(expected, rel=1e-6)

    def test_classify_zero_like_field_not_in_E(self):
        p = P2
        consts = derive_constants(p, 4.0, sobolev_constant_closed_form(2))
        tr = FunctionalTriple(1e-12, 1e-12, 1e-14, p.a)
        report = classify_region_of(tr, p, consts, m_a=-0.01)
        assert report.in_E is False
        assert report.in_sphere is True
        assert report.in_V is True

    def test_lambda_plus_subset_w(self):
        # in_Lambda and F < 0 implies t_minus > 1.  The implication needs the
        # triple to be realizable on an admissible sphere, so samples respect
        # the sharp-interpolation and critical-embedding bounds.
        p = P2
        q_norm = 9.8563
        sob = sobolev_constant_closed_form(2)
        consts = derive_constants(p, q_norm, sob)
        from halfwave.constants import gn_constant_pow_q

        c_opt_q = gn_constant_pow_q(p, q_norm)
        rng = np.random.default_rng(23)
        count = 0
        for _ in range(2000):
            A = 10 ** rng.uniform(-4, np.log10(0.99 * consts.rho0**2))
            b_max = c_opt_q * A ** (p.q_gamma_q / 2) * p.a ** (p.q * (1 - p.gamma_q))
            c_max = (A / sob) ** (p.two_star / 2)
            c_lo = max(1e-300, A - p.mu * p.gamma_q * b_max)
            if c_lo >= c_max:
                continue
            C = rng.uniform(c_lo, c_max)
            B = (A - C) / (p.mu * p.gamma_q)
            if B < 0:
                continue
            tr = FunctionalTriple(A=A, B=B, C=C, mass=p.a)
            if energy(tr, p) >= 0:
                continue
            report = classify_region_of(tr, p, consts, m_a=-1.0)
            assert report.in_Lambda
            count += 1
            assert report.in_W is True
        assert count > 50

    def test_report_serializes(self):
        p = P2
        consts = derive_constants(p, 4.0, sobolev_constant_closed_form(2))
        tr = FunctionalTriple(0.5, 0.2, 0.1, p.a)
        report = classify_region_of(tr, p, consts, m_a=-0.01)
        payload = report.to_json()
        assert '"in_V"' in payload and '"residuals"' in payload


def _has_plus(u, p):
    try:
        cps = fiber_critical_points(triple_of(u, p), p)
    except UndefinedFiberError:
        return False
    return cps.t_plus is not None
