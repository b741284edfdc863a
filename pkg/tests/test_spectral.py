import math

import numpy as np
import pytest
from conftest import random_real_field
from hypothesis import given, settings
from hypothesis import strategies as st

from fracns import spectral as sp


def single_mode(grid, xi, vec):
    """Field with coefficient ``vec`` at xi and its conjugate at -xi."""
    c = np.zeros((grid.dimension,) + grid.shape, dtype=complex)
    n = grid.points_per_axis
    idx = tuple(x % n for x in xi)
    neg = tuple(-x % n for x in xi)
    for i, v in enumerate(vec):
        c[(i,) + idx] += v
        c[(i,) + neg] += np.conj(v)
    return sp.SpectralVectorField(grid, c)


class TestGrid:
    def test_wavenumbers_2d(self):
        g = sp.make_grid(2, 64)
        assert sorted(g.wavenumbers) == list(range(-32, 32))
        assert g.shape == (64, 64)

    def test_wavenumbers_1d(self):
        assert sorted(sp.make_grid(1, 8).wavenumbers) == [-4, -3, -2, -1, 0, 1, 2, 3]

    @pytest.mark.parametrize("d, n", [(2, 7), (2, 6), (4, 8), (0, 8)])
    def test_rejects_bad_grids(self, d, n):
        with pytest.raises(ValueError):
            sp.make_grid(d, n)

    def test_rejects_non_integer(self):
        with pytest.raises(TypeError):
            sp.make_grid(2, 8.0)

    def test_dealias_mask_cuts_upper_third(self):
        g = sp.make_grid(1, 12)
        kept = sorted(g.wavenumbers[g.dealias_mask])
        assert kept == [-3, -2, -1, 0, 1, 2, 3]


class TestSemigroup:
    def test_identity_at_zero(self, grid2):
        u = random_real_field(grid2, 1)
        np.testing.assert_array_equal(sp.apply_semigroup(u, 1.5, 0.0).coeffs, u.coeffs)

    def test_gaussian_single_mode(self, grid2):
        u = single_mode(grid2, (1, 0), (0.3 + 0.1j, 0.0))
        out = sp.apply_semigroup(u, 2.0, 1.0)
        assert out.coeffs[0, 1, 0] == pytest.approx((0.3 + 0.1j) * math.exp(-1.0), rel=1e-15)

    def test_fractional_factor(self, grid2):
        u = single_mode(grid2, (2, 0), (1.0, 0.0))
        out = sp.apply_semigroup(u, 1.5, 2.0)
        assert out.coeffs[0, 2, 0].real == pytest.approx(math.exp(-5.656854249492381), rel=1e-14)

    def test_rejects_negative_time(self, grid2):
        with pytest.raises(ValueError):
            sp.apply_semigroup(random_real_field(grid2), 1.5, -1.0)

    @settings(max_examples=25, deadline=None)
    @given(s=st.floats(0.0, 2.0), t=st.floats(0.0, 2.0), gamma=st.floats(0.5, 2.0))
    def test_semigroup_law(self, s, t, gamma):
        grid = sp.make_grid(2, 16)
        u = random_real_field(grid, 3)
        a = sp.apply_semigroup(sp.apply_semigroup(u, gamma, s), gamma, t)
        b = sp.apply_semigroup(u, gamma, s + t)
        np.testing.assert_allclose(a.coeffs, b.coeffs, rtol=1e-12, atol=1e-15)


class TestProjection:
    def test_gradient_mode_annihilated(self, grid2):
        u = single_mode(grid2, (1, 0), (1.0, 0.0))
        out = sp.leray_project(u)
        assert np.abs(out.coeffs).max() == 0.0

    def test_solenoidal_mode_untouched(self, grid2):
        u = single_mode(grid2, (1, 0), (0.0, 1.0))
        np.testing.assert_array_equal(sp.leray_project(u).coeffs, u.coeffs)

    def test_diagonal_mode(self, grid2):
        u = single_mode(grid2, (1, 1), (1.0, 0.0))
        out = sp.leray_project(u)
        assert out.coeffs[0, 1, 1] == pytest.approx(0.5)
        assert out.coeffs[1, 1, 1] == pytest.approx(-0.5)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_idempotent_and_divergence_free(self, seed):
        grid = sp.make_grid(2, 16)
        u = random_real_field(grid, seed)
        p1 = sp.leray_project(u)
        p2 = sp.leray_project(p1)
        np.testing.assert_allclose(p2.coeffs, p1.coeffs, atol=1e-15)
        assert sp.divergence_residual(p1) <= 1e-12


class TestMultipliers:
    def test_fractional_identity(self, grid2):
        u = random_real_field(grid2, 2)
        np.testing.assert_array_equal(sp.fractional_derivative(u, 0.0).coeffs, u.coeffs)

    def test_fractional_factor_five(self, grid2):
        u = single_mode(grid2, (3, 4), (1.0, 0.0))
        out = sp.fractional_derivative(u, 1.0)
        assert out.coeffs[0, 3, 4].real == pytest.approx(5.0)

    def test_negative_order_needs_mean_zero(self, grid2):
        u = random_real_field(grid2, 2, mean_zero=False)
        with pytest.raises(ValueError):
            sp.fractional_derivative(u, -1.0)

    def test_partial_identity(self, grid2):
        u = random_real_field(grid2, 2)
        np.testing.assert_array_equal(sp.partial_derivative(u, (0, 0)).coeffs, u.coeffs)

    def test_dx_sin_is_cos(self):
        g = sp.make_grid(1, 16)
        (x,) = g.coordinates()
        u = sp.SpectralVectorField.from_physical(g, np.sin(x)[None])
        du = sp.partial_derivative(u, (1,)).to_physical()[0]
        np.testing.assert_allclose(du, np.cos(x), atol=1e-14)

    def test_dyy_sin(self, grid2):
        x, y = grid2.coordinates()
        vals = np.stack([np.sin(y) + 0 * x, 0 * (x + y)])
        u = sp.SpectralVectorField.from_physical(grid2, vals)
        out = sp.partial_derivative(u, (0, 2)).to_physical()
        np.testing.assert_allclose(out[0], -np.sin(y) + 0 * x, atol=1e-13)

    def test_derivative_skew_adjoint(self, grid2):
        u = random_real_field(grid2, 4)
        v = random_real_field(grid2, 5)
        lhs = sp.inner_product(sp.partial_derivative(u, (1, 0)), v)
        rhs = -sp.inner_product(u, sp.partial_derivative(v, (1, 0)))
        assert lhs == pytest.approx(rhs, abs=1e-12)


class TestNonlinearity:
    def test_shear_vanishes(self, grid2):
        x, y = grid2.coordinates()
        u = sp.SpectralVectorField.from_physical(
            grid2, np.stack([np.sin(y) + 0 * x, 0 * (x + y)]), mean_zero=True, div_free=True)
        assert np.abs(sp.nonlinear_term(u).coeffs).max() < 1e-15

    def test_taylor_green_projected_out(self, grid2):
        x, y = grid2.coordinates()
        vals = np.stack([np.sin(x) * np.cos(y), -np.cos(x) * np.sin(y)])
        u = sp.SpectralVectorField.from_physical(grid2, vals, mean_zero=True, div_free=True)
        assert np.abs(sp.nonlinear_term(u).coeffs).max() < 1e-15

    def test_requires_div_free(self, grid2):
        with pytest.raises(ValueError):
            sp.nonlinear_term(random_real_field(grid2, 1))

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 10_000), n=st.sampled_from([16, 24, 32]))
    def test_energy_orthogonality(self, seed, n):
        grid = sp.make_grid(2, n)
        u = random_real_field(grid, seed, project=True)
        nl = sp.nonlinear_term(u)
        scale = math.sqrt(sp.energy(u) * sp.energy(nl))
        assert abs(sp.inner_product(u, nl)) <= 1e-12 * scale

    def test_output_real_and_solenoidal(self):
        grid = sp.make_grid(3, 16)
        u = random_real_field(grid, 7, project=True)
        nl = sp.nonlinear_term(u)
        assert sp.hermitian_defect(grid, nl.coeffs) < 1e-13
        assert sp.divergence_residual(nl) < 1e-13


class TestNorms:
    def test_sup_of_shear(self, grid2):
        x, y = grid2.coordinates()
        u = sp.SpectralVectorField.from_physical(grid2, np.stack([np.sin(y) + 0 * x, 0 * (x + y)]))
        assert sp.lp_norm(u, math.inf) == pytest.approx(1.0, abs=1e-14)

    def test_l2_of_shear(self, grid2):
        x, y = grid2.coordinates()
        u = sp.SpectralVectorField.from_physical(grid2, np.stack([np.sin(y) + 0 * x, 0 * (x + y)]))
        assert sp.lp_norm(u, 2.0) == pytest.approx(math.sqrt(2.0) * math.pi, rel=1e-14)

    @pytest.mark.parametrize("p", [1.0, 2.0, 6.0, math.inf])
    def test_zero_field(self, grid2, p):
        assert sp.lp_norm(sp.SpectralVectorField.zeros(grid2), p) == 0.0

    def test_rejects_p_below_one(self, grid2):
        with pytest.raises(ValueError):
            sp.lp_norm(sp.SpectralVectorField.zeros(grid2), 0.5)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10_000), d=st.sampled_from([1, 2, 3]))
    def test_round_trip_and_parseval(self, seed, d):
        grid = sp.make_grid(d, 8 if d == 3 else 16)
        vals = np.random.default_rng(seed).standard_normal((d,) + grid.shape)
        u = sp.SpectralVectorField.from_physical(grid, vals)
        np.testing.assert_allclose(u.to_physical(), vals, atol=1e-13)
        assert sp.hermitian_defect(grid, u.coeffs) < 1e-14
        assert sp.energy(u) == pytest.approx(sp.lp_norm(u, 2.0) ** 2, rel=1e-12)
