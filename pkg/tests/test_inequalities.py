import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracns import inequalities as iq
from fracns import spectral as sp


class TestHermite:
    @pytest.mark.parametrize("x", [-1.3, 0.0, 0.4, 2.0])
    def test_base_cases(self, x):
        assert iq.hermite_eval(0, x) == 1.0
        assert iq.hermite_eval(1, x) == 2.0 * x
        assert iq.hermite_eval(2, x) == pytest.approx(4.0 * x * x - 2.0)

    def test_h3_at_one(self):
        assert iq.hermite_eval(3, 1.0) == -4.0

    def test_derivative_identity(self):
        # d^n/dx^n exp(-x^2) = (-1)^n H_n(x) exp(-x^2)
        with mpmath.workdps(40):
            fd = float(mpmath.diff(lambda s: mpmath.exp(-s * s), mpmath.mpf("0.7"), 5))
        assert fd == pytest.approx(-iq.hermite_eval(5, 0.7) * math.exp(-0.49), rel=1e-5)

    @settings(max_examples=30, deadline=None)
    @given(n=st.integers(0, 120), x=st.floats(-5.0, 5.0))
    def test_matches_mpmath(self, n, x):
        ref = float(mpmath.hermite(n, x))
        assert iq.hermite_eval(n, x) == pytest.approx(ref, rel=1e-9, abs=1e-300)

    def test_degree_range(self):
        with pytest.raises(ValueError):
            iq.hermite_eval(201, 0.0)


class TestCramer:
    def test_degree_zero(self):
        x = np.linspace(-10, 10, 2001)
        assert np.all(iq.hermite_ratio_table(0, x)[0] <= 1.0)

    def test_degree_one_maximum(self):
        x = np.linspace(0, 3, 30001)
        row = iq.hermite_ratio_table(1, x)[1]
        assert row.max() == pytest.approx(math.sqrt(2.0 / math.e), rel=1e-8)
        assert x[np.argmax(row)] == pytest.approx(1.0, abs=1e-3)

    def test_ratio_matches_direct(self):
        x = np.array([0.3, 1.7])
        tab = iq.hermite_ratio_table(10, x)
        for n in (3, 10):
            direct = [abs(iq.hermite_eval(n, v)) * math.exp(-v * v / 2) / math.sqrt(2**n * math.factorial(n))
                      for v in x]
            np.testing.assert_allclose(tab[n], direct, rtol=1e-12)

    def test_bound_to_fifty(self):
        rep = iq.check_cramer_bound(50, np.linspace(-10, 10, 4001))
        assert rep.passed and rep.measured_sup <= 1.09


class TestSupInequality:
    def test_closed_form_m2(self):
        sup, x_star = iq.sup_closed_form(0, 0)
        assert sup == pytest.approx(8.0 / math.e, rel=1e-14)
        assert x_star == pytest.approx(2.0 * math.sqrt(2.0))
        x = np.linspace(0.01, 10, 100001)
        assert (x**2 * np.exp(-(x**2) / 8)).max() == pytest.approx(sup, rel=1e-8)

    def test_k1_d1(self):
        rep = iq.sup_inequality_check(1, 1)
        assert rep.measured_sup == pytest.approx((16.0 / math.e) ** 2, rel=1e-12)
        assert rep.normalized_constant == pytest.approx(16.0 / math.e, rel=1e-12)
        assert rep.passed

    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_sequence_bounded(self, d):
        assert iq.sup_inequality_sequence(d, 200).passed


class TestRecurrences:
    def test_first_values(self):
        assert iq.g_sequence(4).values == [1, 2, 8, 40, 224]

    def test_closed_form_and_bound(self):
        rep = iq.g_sequence(64)
        assert rep.extras["closed_form_ok"]
        assert rep.passed
        assert all(b > a for a, b in zip(rep.normalized[1:], rep.normalized[2:]))

    def test_f_base_case(self):
        assert iq.f_sequence(0, 2.0, 1.0, 1).values == [2.0]

    def test_f_unit_parameters(self):
        rep = iq.f_sequence(50, 1.0, 1.0, 1, 2.0)
        assert rep.passed
        assert all(b > a for a, b in zip(rep.values, rep.values[1:]))

    @pytest.mark.parametrize("C", [1.0, 2.0])
    @pytest.mark.parametrize("C1", [1.0, 2.0])
    @pytest.mark.parametrize("N", [1, 2, 4])
    @pytest.mark.parametrize("gamma", [1.5, 2.0])
    def test_f_majorization_sweep(self, C, C1, N, gamma):
        assert iq.f_sequence(100, C, C1, N, gamma).passed

    def test_f_log_domain_flag(self):
        assert iq.f_sequence(150, 2.0, 2.0, 1).extras["log_domain"]


class TestStirling:
    def test_endpoints(self):
        for k in range(1, 12):
            for N in (1, 2, 4):
                assert iq.stirling_ratio(k, 0, 1, N) <= 1.0
                assert iq.stirling_ratio(k, k, 1, N) <= 1.0

    def test_worked_example(self):
        assert iq.stirling_ratio(4, 2, 1, 1) == pytest.approx(96.0 / 3125.0, rel=1e-12)

    @pytest.mark.parametrize("N", [1, 2, 4])
    def test_bounded(self, N):
        assert iq.binomial_stirling_check(N, 60).passed


class TestLeibniz:
    def test_holder_case(self):
        g = sp.make_grid(1, 64)
        rng = np.random.default_rng(0)
        for _ in range(20):
            f = rng.standard_normal(g.shape)
            h = rng.standard_normal(g.shape)
            assert iq.leibniz_ratio(g, f, h, 0.0, 4.0) <= 0.5 + 1e-12

    def test_single_mode(self):
        g = sp.make_grid(1, 64)
        (x,) = g.coordinates()
        r = iq.leibniz_ratio(g, np.sin(x), np.sin(x), 0.5, 4.0)
        # Lambda^eps(sin^2) = -2^{eps-1} cos 2x and Lambda^eps sin = sin:
        # ||2^{-1/2} cos 2x||_2 / (2 ||sin||_4^2) = sqrt(pi/2) / (2 sqrt(3 pi/4))
        assert r == pytest.approx(1.0 / math.sqrt(6.0), rel=1e-12)

    def test_seeded_sweep_stable(self):
        g = sp.make_grid(1, 128)
        rep = iq.fractional_leibniz_check(g, 0.5, 6.0, trials=200, seed=3)
        again = iq.fractional_leibniz_check(g, 0.5, 6.0, trials=200, seed=3)
        assert rep.extras["empirical_Cp"] == again.extras["empirical_Cp"]
        assert math.isfinite(rep.extras["empirical_Cp"])

    def test_argument_ranges(self):
        g = sp.make_grid(1, 16)
        with pytest.raises(ValueError):
            iq.fractional_leibniz_check(g, 1.5, 6.0)
        with pytest.raises(ValueError):
            iq.fractional_leibniz_check(g, 0.5, 2.0)
