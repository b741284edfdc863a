"""One-sided stable laws and the quadrature that subordinates G_gamma to Gaussians.

The law of index ``a`` in (0, 1) is the non-negative law with Laplace
transform exp(-lambda**a).  Its density is evaluated from Kanter's
single-integral representation

    f(u) = b u^{-1/(1-a)} / pi * int_0^pi K(phi) exp(-u^{-b} K(phi)) dphi,
    K(phi) = (sin(a phi)/sin phi)^{1/(1-a)} sin((1-a) phi)/sin(a phi),
    b = a/(1-a),

and, once u^{-a} <= 0.1, from the convergent large-u series
f(u) = (1/pi) sum_n (-1)^{n+1} Gamma(an+1)/n! sin(pi a n) u^{-an-1}.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize, special

__all__ = [
    "StableQuadrature",
    "stable_density",
    "stable_tail_mass",
    "build_stable_quadrature",
    "laplace_identity_error",
]

_SERIES_SWITCH = 0.1
_PANEL_NODES = 8
_LAPLACE_TOL = 1e-6
_MASS_TOL = 1e-8


def _log_kanter(a: float, phi: float) -> float:
    return (
        (math.log(math.sin(a * phi)) - math.log(math.sin(phi))) / (1.0 - a)
        + math.log(math.sin((1.0 - a) * phi))
        - math.log(math.sin(a * phi))
    )


def _check_index(a: float) -> None:
    if not 0.0 < a < 1.0:
        raise ValueError(f"stable index must lie in (0, 1), got {a}")


def _series_density(a: float, u: float) -> float:
    total = 0.0
    logu = math.log(u)
    for n in range(1, 400):
        mag = math.exp(special.gammaln(a * n + 1) - special.gammaln(n + 1) - (a * n + 1) * logu)
        total += (-1) ** (n + 1) * mag * math.sin(math.pi * a * n)
        if mag < 1e-18 * abs(total):
            break
    return total / math.pi


def _integral_density(a: float, u: float) -> float:
    b = a / (1.0 - a)
    log_c = -b * math.log(u)
    c = math.exp(log_c)
    k0 = (1.0 - a) * a**b  # K(0+), the minimum of K
    log_k0 = math.log(k0)

    if log_c + log_k0 > 700.0:
        return 0.0  # the factor exp(-c k0) underflows

    def integrand(phi: float) -> float:
        lk = log_k0 if phi < 1e-9 else _log_kanter(a, phi)
        # c (K - k0) without cancellation between two large terms
        excess = c * k0 * math.expm1(lk - log_k0)
        if excess > 700.0:
            return 0.0
        return math.exp(lk - excess)

    # Split where c*(K - k0) crosses fixed levels so every piece is benign:
    # the peak near phi = 0 for small u and the spike near phi = pi for large u.
    breaks = [0.0, math.pi]
    hi = math.pi * (1.0 - 1e-15)
    for level in (0.01, 0.1, 1.0, 5.0, 20.0, 60.0):
        target = math.log(k0 + level / c)
        f = lambda p, target=target: _log_kanter(a, p) - target  # noqa: E731
        if f(1e-9) < 0.0 < f(hi):
            breaks.append(optimize.brentq(f, 1e-9, hi, xtol=1e-15, rtol=1e-14))
    breaks = sorted(set(breaks))
    total = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for lo, up in zip(breaks[:-1], breaks[1:]):
            total += integrate.quad(integrand, lo, up, epsabs=0.0, epsrel=1e-11, limit=200)[0]
    return b * math.exp(-math.log(u) / (1.0 - a) - c * k0) / math.pi * total


def stable_density(a: float, u: float) -> float:
    """Density of the one-sided stable law with Laplace transform exp(-lambda**a)."""
    _check_index(a)
    if not u > 0:
        raise ValueError(f"u must be positive, got {u}")
    if u ** (-a) <= _SERIES_SWITCH:
        return _series_density(a, u)
    return _integral_density(a, u)


def stable_tail_mass(a: float, u: float) -> float:
    """P(U > u) from the large-u series; accurate when u**(-a) is small."""
    _check_index(a)
    total = 0.0
    for n in range(1, 200):
        term = u ** (-a * n) / math.factorial(n) * special.rgamma(1.0 - a * n)
        total += (-1) ** (n + 1) * term
        if abs(term) < 1e-18 * abs(total) and n > 2:
            break
    return total


@dataclass(frozen=True)
class StableQuadrature:
    """Positive nodes/weights discretizing the stable law of index ``stable_index``."""

    stable_index: float
    nodes: np.ndarray
    weights: np.ndarray

    def laplace(self, lam) -> np.ndarray:
        """sum_i w_i exp(-lam u_i), vectorized over ``lam``."""
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        return np.exp(-np.outer(lam, self.nodes)) @ self.weights


def laplace_identity_error(quad: StableQuadrature, lam=None) -> float:
    """max |sum w exp(-lam u) - exp(-lam**a)| over a grid of lam in [0, 50]."""
    if lam is None:
        lam = np.concatenate([[0.0], np.logspace(-10, math.log10(50.0), 241)])
    lam = np.asarray(lam, dtype=float)
    return float(np.max(np.abs(quad.laplace(lam) - np.exp(-(lam**quad.stable_index)))))


def build_stable_quadrature(a: float, node_count: int = 1024) -> StableQuadrature:
    """Gauss-Legendre panels in log-variables, plus one node carrying the far tail.

    The bulk is integrated in z = b*log(u), where the law has O(1) width for
    every index; the heavy tail is integrated in log(u) up to the point where
    the remaining mass is below 1e-10, and that remainder is put on the last
    node.

    Raises:
        ValueError: if ``a`` or ``node_count`` is out of range, or if the
            Laplace identity misses 1e-6 at this node count.
    """
    _check_index(a)
    if not 32 <= node_count <= 2048:
        raise ValueError(f"node_count must lie in [32, 2048], got {node_count}")
    return _build_cached(float(a), int(node_count))


@lru_cache(maxsize=32)
def _build_cached(a: float, node_count: int) -> StableQuadrature:
    b = a / (1.0 - a)
    k0 = (1.0 - a) * a**b
    z_lo = math.log(k0 / 40.0)
    z_c = 3.0
    y_c = z_c / b
    y_hi = math.log(1.0 / (1e-10 * special.gamma(1.0 - a))) / a
    panels = node_count // _PANEL_NODES - 1
    width = ((z_c - z_lo) + (y_hi - y_c)) / panels
    n_core = max(1, math.ceil((z_c - z_lo) / width))
    n_tail = max(1, panels - n_core)
    x, w = np.polynomial.legendre.leggauss(_PANEL_NODES)

    nodes: list[float] = []
    weights: list[float] = []
    edges = np.linspace(z_lo, z_c, n_core + 1)
    for lo, up in zip(edges[:-1], edges[1:]):
        for zi, wi in zip(0.5 * (lo + up) + 0.5 * (up - lo) * x, 0.5 * (up - lo) * w):
            u = math.exp(zi / b)
            nodes.append(u)
            weights.append(wi * stable_density(a, u) * u / b)
    edges = np.linspace(y_c, y_hi, n_tail + 1)
    for lo, up in zip(edges[:-1], edges[1:]):
        for yi, wi in zip(0.5 * (lo + up) + 0.5 * (up - lo) * x, 0.5 * (up - lo) * w):
            u = math.exp(yi)
            nodes.append(u)
            weights.append(wi * stable_density(a, u) * u)
    u_hi = math.exp(y_hi)
    nodes.append(u_hi)
    weights.append(stable_tail_mass(a, u_hi))

    quad = StableQuadrature(a, np.array(nodes), np.array(weights))
    if np.any(quad.weights <= 0):
        raise ValueError(f"non-positive weights at node_count={node_count}; use more nodes")
    mass_err = abs(float(quad.weights.sum()) - 1.0)
    lap_err = laplace_identity_error(quad)
    if mass_err > _MASS_TOL or lap_err > _LAPLACE_TOL:
        raise ValueError(
            f"stable quadrature (a={a}, nodes={node_count}) misses tolerance: "
            f"mass error {mass_err:.2e}, Laplace error {lap_err:.2e}; request more nodes"
        )
    return quad
