import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from halfwave.grid import (
    DilationLeakWarning,
    Field,
    dilate,
    field_from_function,
    h_half_seminorm_sq,
    l2_inner,
    lp_norm,
    make_grid,
    refine,
    sqrt_laplacian,
    translate,
)

GAUSS_SEMINORM = math.pi**1.5 / 2.0  # integral of |xi| exp(-|xi|^2) over R^2


def gaussian(grid, width=1.0):
    return field_from_function(grid, lambda x, y: np.exp(-(x**2 + y**2) / (2 * width**2)))


@pytest.fixture(scope="module")
def grid40():
    return make_grid(2, 40.0, 256)


@pytest.fixture(scope="module")
def grid80():
    return make_grid(2, 80.0, 512)


class TestMakeGrid:
    def test_wavenumbers_two_pi_box(self):
        g = make_grid(2, 2 * math.pi, 8)
        assert sorted(np.round(g.k1d).astype(int)) == list(range(-4, 4))

    def test_cell_volume(self):
        g = make_grid(2, 40.0, 256)
        assert g.cell_volume == pytest.approx((40.0 / 256) ** 2, abs=0.0)

    def test_cell_volume_partition_identity(self):
        for dim, L, n in [(2, 40.0, 256), (3, 17.3, 32), (2, 0.77, 10)]:
            g = make_grid(dim, L, n)
            assert g.cell_volume * n**dim == pytest.approx(L**dim, rel=1e-14)

    @pytest.mark.parametrize(
        "dim,L,n",
        [(2, 40.0, 255), (2, 40.0, 6), (2, -1.0, 64), (2, 0.0, 64), (1, 10.0, 64), (4, 10.0, 64)],
    )
    def test_rejects_bad_parameters(self, dim, L, n):
        with pytest.raises(ValueError):
            make_grid(dim, L, n)

    def test_wavenumber_symmetric_except_nyquist(self):
        g = make_grid(2, 10.0, 16)
        k = np.round(g.k1d / (2 * math.pi / 10.0)).astype(int)
        assert set(k) == set(range(-8, 8))


class TestField:
    def test_rejects_shape_mismatch(self):
        g = make_grid(2, 10.0, 16)
        with pytest.raises(ValueError):
            Field(g, np.zeros((16, 8)))

    def test_rejects_nonfinite(self):
        g = make_grid(2, 10.0, 16)
        vals = np.zeros((16, 16))
        vals[3, 4] = np.inf
        with pytest.raises(ValueError):
            Field(g, vals)


class TestSqrtLaplacian:
    def test_plane_wave_unit_mode(self):
        g = make_grid(2, 2 * math.pi, 16)
        u = field_from_function(g, lambda x, y: np.cos(x))
        out = sqrt_laplacian(u)
        assert np.max(np.abs(out.values - u.values)) < 1e-12

    def test_plane_wave_mode_34(self):
        g = make_grid(2, 2 * math.pi, 16)
        u = field_from_function(g, lambda x, y: np.cos(3 * x + 4 * y))
        out = sqrt_laplacian(u)
        assert np.max(np.abs(out.values - 5.0 * u.values)) < 1e-10

    def test_constant_maps_to_zero(self):
        g = make_grid(2, 7.0, 16)
        u = Field(g, np.full((16, 16), 2.5))
        assert np.max(np.abs(sqrt_laplacian(u).values)) < 1e-14

    @settings(max_examples=20, deadline=None)
    @given(
        kx=st.integers(min_value=-7, max_value=7),
        ky=st.integers(min_value=-7, max_value=7),
        phase=st.floats(min_value=0.0, max_value=6.28),
    )
    def test_plane_wave_eigenrelation(self, kx, ky, phase):
        # Nyquist row (k = -n/2) is excluded: its multiplier is zeroed by design.
        L = 11.0
        g = make_grid(2, L, 16)
        u = field_from_function(
            g, lambda x, y: np.cos(2 * math.pi * (kx * x + ky * y) / L + phase)
        )
        lam = 2 * math.pi * math.hypot(kx, ky) / L
        out = sqrt_laplacian(u)
        assert np.max(np.abs(out.values - lam * u.values)) <= 1e-10 * max(lam, 1.0)


class TestSeminorm:
    def test_constant_is_zero(self):
        g = make_grid(2, 9.0, 16)
        assert h_half_seminorm_sq(Field(g, np.ones((16, 16)))) == 0.0

    def test_gaussian_value_converges_with_box(self):
        # The torus value differs from the closed form by the periodized-kernel
        # image term, which decays like L^-3 at fixed spacing.
        errs = []
        for L, n in [(40.0, 256), (80.0, 512)]:
            u = gaussian(make_grid(2, L, n))
            errs.append(abs(h_half_seminorm_sq(u) - GAUSS_SEMINORM) / GAUSS_SEMINORM)
        assert errs[0] < 5e-4
        assert errs[1] < errs[0] / 6.0

    def test_parseval_consistency_random_fields(self, grid40):
        rng = np.random.default_rng(7)
        for _ in range(100):
            u = Field(grid40, rng.standard_normal((256, 256)))
            semi = h_half_seminorm_sq(u)
            inner = l2_inner(u, sqrt_laplacian(u))
            assert abs(semi - inner) <= 1e-12 * max(semi, 1e-30)


class TestLpNorm:
    def test_gaussian_l2(self, grid40):
        u = gaussian(grid40)
        assert lp_norm(u, 2.0) == pytest.approx(math.sqrt(math.pi), rel=1e-12)

    def test_gaussian_l4(self, grid40):
        u = gaussian(grid40)
        assert lp_norm(u, 4.0) == pytest.approx((math.pi / 2.0) ** 0.25, rel=1e-10)

    def test_zero_field(self, grid40):
        z = Field(grid40, np.zeros((256, 256)))
        for p in (1.0, 2.0, 2.5, 4.0):
            assert lp_norm(z, p) == 0.0

    def test_rejects_p_below_one(self, grid40):
        with pytest.raises(ValueError):
            lp_norm(gaussian(grid40), 0.5)

    @settings(max_examples=30, deadline=None)
    @given(
        c=st.floats(min_value=-50.0, max_value=50.0).filter(lambda x: abs(x) > 1e-3),
        p=st.floats(min_value=1.0, max_value=6.0),
    )
    def test_homogeneity(self, c, p):
        g = make_grid(2, 10.0, 16)
        rng = np.random.default_rng(3)
        vals = rng.standard_normal((16, 16))
        u, cu = Field(g, vals), Field(g, c * vals)
        assert lp_norm(cu, p) == pytest.approx(abs(c) * lp_norm(u, p), rel=1e-12)


class TestInner:
    def test_self_inner_is_norm_squared(self, grid40):
        u = gaussian(grid40)
        assert l2_inner(u, u) == pytest.approx(lp_norm(u, 2.0) ** 2, rel=1e-13)

    def test_orthogonal_modes(self):
        g = make_grid(2, 2 * math.pi, 16)
        u = field_from_function(g, lambda x, y: np.cos(x))
        v = field_from_function(g, lambda x, y: np.cos(2 * x))
        assert abs(l2_inner(u, v)) < 1e-12

    def test_zero_field(self, grid40):
        u = gaussian(grid40)
        z = Field(grid40, np.zeros((256, 256)))
        assert l2_inner(u, z) == 0.0

    def test_grid_mismatch_raises(self):
        u = gaussian(make_grid(2, 10.0, 16))
        v = gaussian(make_grid(2, 12.0, 16))
        with pytest.raises(ValueError):
            l2_inner(u, v)


class TestDilate:
    def test_identity(self, grid80):
        u = gaussian(grid80)
        assert np.array_equal(dilate(u, 1.0).values, u.values)

    def test_mass_preserved_narrowing(self, grid80):
        u = gaussian(grid80)
        d = dilate(u, 2.0)
        assert lp_norm(d, 2.0) == pytest.approx(lp_norm(u, 2.0), rel=1e-8)

    def test_seminorm_scaling_against_closed_form(self, grid80):
        # Both sides against the analytic value at the dilated scale: the
        # narrow Gaussian's torus image term is 64x smaller than the wide one's.
        u = gaussian(grid80)
        d = dilate(u, 4.0)
        assert h_half_seminorm_sq(d) == pytest.approx(4.0 * GAUSS_SEMINORM, rel=1e-6)

    def test_semigroup(self, grid80):
        u = gaussian(grid80)
        ab = dilate(dilate(u, 1.3), 1.7)
        combined = dilate(u, 1.3 * 1.7)
        assert np.max(np.abs(ab.values - combined.values)) < 1e-6

    def test_rejects_nonpositive_factor(self, grid80):
        u = gaussian(grid80)
        for t in (0.0, -1.0, math.nan):
            with pytest.raises(ValueError):
                dilate(u, t)

    def test_leak_warning_when_spreading_past_box(self):
        g = make_grid(2, 20.0, 64)
        u = gaussian(g, width=4.0)
        with pytest.warns(DilationLeakWarning):
            dilate(u, 0.05)


class TestTranslate:
    def test_zero_offset_identity(self, grid80):
        u = gaussian(grid80)
        out = translate(u, [0.0, 0.0])
        assert np.max(np.abs(out.values - u.values)) < 1e-14

    def test_norms_preserved(self, grid80):
        u = gaussian(grid80)
        v = translate(u, [3.7, -11.2])
        for p in (2.0, 2.5, 4.0):
            assert lp_norm(v, p) == pytest.approx(lp_norm(u, p), rel=1e-10)

    def test_group_inverse(self, grid80):
        u = gaussian(grid80)
        back = translate(translate(u, [5.0, 2.5]), [-5.0, -2.5])
        assert np.max(np.abs(back.values - u.values)) < 1e-10

    def test_shift_matches_exact_gaussian(self, grid80):
        u = gaussian(grid80)
        v = translate(u, [4.0, 0.0])
        expected = field_from_function(
            grid80, lambda x, y: np.exp(-((x - 4.0) ** 2 + y**2) / 2)
        )
        assert np.max(np.abs(v.values - expected.values)) < 1e-10

    def test_rejects_bad_offset(self, grid80):
        u = gaussian(grid80)
        with pytest.raises(ValueError):
            translate(u, [1.0])
        with pytest.raises(ValueError):
            translate(u, [np.inf, 0.0])


class TestRefine:
    def test_refine_preserves_samples_and_norms(self):
        g = make_grid(2, 30.0, 64)
        u = gaussian(g)
        fine = refine(u, 128)
        assert fine.grid.points_per_dim == 128
        assert np.max(np.abs(fine.values[::2, ::2] - u.values)) < 1e-11
        assert lp_norm(fine, 2.0) == pytest.approx(lp_norm(u, 2.0), rel=1e-10)
        assert h_half_seminorm_sq(fine) == pytest.approx(h_half_seminorm_sq(u), rel=1e-10)
