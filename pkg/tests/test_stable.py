import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from fracns import stable


def levy_density(u):
    return u**-1.5 * math.exp(-1.0 / (4.0 * u)) / (2.0 * math.sqrt(math.pi))


class TestDensity:
    def test_levy_at_one(self):
        assert stable.stable_density(0.5, 1.0) == pytest.approx(0.2196956, abs=1e-7)

    def test_levy_at_quarter(self):
        assert stable.stable_density(0.5, 0.25) == pytest.approx(4.0 * math.exp(-1.0) / math.sqrt(math.pi), abs=1e-7)

    @pytest.mark.parametrize("u", [0.01, 0.1, 0.7, 3.0, 50.0, 1e4])
    def test_levy_closed_form(self, u):
        assert stable.stable_density(0.5, u) == pytest.approx(levy_density(u), rel=1e-6, abs=1e-14)

    @pytest.mark.parametrize("a", [0.3, 0.5, 0.6, 0.75, 0.95])
    def test_unit_mass(self, a):
        # split at the series switch, where the representation changes
        switch = 0.1 ** (-1.0 / a)
        lo, _ = integrate.quad(lambda u: stable.stable_density(a, u), 0.0, 1.0, limit=200)
        mid, _ = integrate.quad(lambda u: stable.stable_density(a, u), 1.0, max(switch, 1.0), limit=200)
        tail = stable.stable_tail_mass(a, max(switch, 1.0))
        assert lo + mid + tail == pytest.approx(1.0, abs=1e-6)

    @pytest.mark.parametrize("a, u", [(1.0, 1.0), (0.0, 1.0), (0.5, 0.0), (0.5, -1.0)])
    def test_rejects_bad_arguments(self, a, u):
        with pytest.raises(ValueError):
            stable.stable_density(a, u)


class TestQuadrature:
    def test_weights_sum_to_one(self):
        quad = stable.build_stable_quadrature(0.75)
        assert quad.laplace(0.0)[0] == pytest.approx(1.0, abs=1e-8)
        assert np.all(quad.weights > 0)

    def test_laplace_at_one(self):
        quad = stable.build_stable_quadrature(0.75)
        # sum w exp(-lambda s/4) with s = 4u
        assert quad.laplace(1.0)[0] == pytest.approx(math.exp(-1.0), abs=1e-6)

    def test_levy_laplace(self):
        quad = stable.build_stable_quadrature(0.5)
        assert quad.laplace(4.0)[0] == pytest.approx(math.exp(-2.0), abs=1e-6)

    @pytest.mark.parametrize("a", [0.5, 0.6, 0.75, 0.95])
    def test_laplace_identity_on_range(self, a):
        quad = stable.build_stable_quadrature(a)
        assert stable.laplace_identity_error(quad) <= 1e-6

    @settings(max_examples=15, deadline=None)
    @given(lam=st.floats(0.0, 50.0))
    def test_laplace_identity_property(self, lam):
        quad = stable.build_stable_quadrature(0.6)
        assert abs(quad.laplace(lam)[0] - math.exp(-(lam**0.6))) <= 1e-6

    def test_rejects_bad_node_count(self):
        with pytest.raises(ValueError):
            stable.build_stable_quadrature(0.75, node_count=8)

    def test_too_few_nodes_reported(self):
        with pytest.raises(ValueError, match="request more nodes|use more nodes"):
            stable.build_stable_quadrature(0.95, node_count=32)
