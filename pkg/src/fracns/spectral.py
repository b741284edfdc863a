"""Periodic spectral substrate: grids, transforms, multipliers and norms.

Fields live on the torus [0, 2*pi)^d with integer wavenumbers.  Coefficients
are Fourier-series coefficients stored in FFT order,

    u(x) = sum_xi c(xi) exp(i xi.x),    c = fftn(u) / n**d,

so that ``||u||_2**2 == (2*pi)**d * sum |c|**2``.

Nyquist handling: the wavenumber -n/2 has no partner of opposite sign on the
grid.  Every odd multiplier (i*xi, the divergence, the Leray projector) uses a
"derivative wavevector" whose Nyquist entries are zero, which keeps real fields
real and derivatives skew-adjoint.  Even multipliers (|xi|**s, exp(-t|xi|**g))
use the true |xi|.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
import scipy.fft

__all__ = [
    "TorusGrid",
    "SpectralVectorField",
    "make_grid",
    "set_fft_workers",
    "forward",
    "inverse",
    "apply_semigroup",
    "leray_project",
    "fractional_derivative",
    "partial_derivative",
    "nonlinear_term",
    "dealias",
    "lp_norm",
    "scalar_lp_norm",
    "inner_product",
    "divergence_residual",
    "hermitian_defect",
    "energy",
]

TWO_PI = 2.0 * math.pi
_FFT_WORKERS = 1


def set_fft_workers(workers: int) -> None:
    """Set the thread count used by every transform in the package."""
    global _FFT_WORKERS
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    _FFT_WORKERS = int(workers)


@dataclass(frozen=True)
class TorusGrid:
    """Uniform grid on [0, 2*pi)^d with ``n`` points per axis.

    Attributes:
        dimension: Spatial dimension d.
        points_per_axis: Points per axis n (even, >= 8).
        period: Axis length; fixed at 2*pi.
    """

    dimension: int
    points_per_axis: int
    period: float = field(default=TWO_PI)

    def __post_init__(self) -> None:
        if self.dimension not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.dimension}")
        n = self.points_per_axis
        if n % 2:
            raise ValueError(f"points_per_axis must be even, got {n}")
        if not 8 <= n <= 4096:
            raise ValueError(f"points_per_axis must lie in [8, 4096], got {n}")
        if self.period != TWO_PI:
            raise ValueError("the torus period is fixed at 2*pi")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_axis,) * self.dimension

    @property
    def cell_volume(self) -> float:
        return (self.period / self.points_per_axis) ** self.dimension

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Integer wavenumbers of one axis in FFT order."""
        n = self.points_per_axis
        return np.rint(np.fft.fftfreq(n, d=1.0 / n)).astype(np.int64)

    @cached_property
    def wavevector(self) -> tuple[np.ndarray, ...]:
        """Broadcastable per-axis wavenumber arrays (true values)."""
        k = self.wavenumbers.astype(float)
        return tuple(
            k.reshape([-1 if a == i else 1 for a in range(self.dimension)])
            for i in range(self.dimension)
        )

    @cached_property
    def deriv_wavevector(self) -> tuple[np.ndarray, ...]:
        """Per-axis wavenumbers with the Nyquist entry set to zero."""
        k = self.wavenumbers.astype(float)
        k[self.points_per_axis // 2] = 0.0
        return tuple(
            k.reshape([-1 if a == i else 1 for a in range(self.dimension)])
            for i in range(self.dimension)
        )

    @cached_property
    def k_norm(self) -> np.ndarray:
        """|xi| on the full coefficient grid."""
        return np.sqrt(sum(k**2 for k in np.broadcast_arrays(*self.wavevector)))

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask: keep modes with |xi_i| < n/3 on every axis."""
        cut = self.points_per_axis / 3.0
        mask = np.ones(self.shape, dtype=bool)
        for k in self.wavevector:
            mask = mask & (np.abs(k) < cut)
        return mask

    def coordinates(self) -> tuple[np.ndarray, ...]:
        """Physical grid coordinates, broadcastable like ``wavevector``."""
        x = np.arange(self.points_per_axis) * (self.period / self.points_per_axis)
        return tuple(
            x.reshape([-1 if a == i else 1 for a in range(self.dimension)])
            for i in range(self.dimension)
        )


def make_grid(d: int, n: int) -> TorusGrid:
    """Build the 2*pi-periodic grid with ``n`` points on each of ``d`` axes."""
    if isinstance(d, bool) or not isinstance(d, (int, np.integer)):
        raise TypeError("d must be an integer")
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
        raise TypeError("n must be an integer")
    return TorusGrid(int(d), int(n))


def forward(grid: TorusGrid, values: np.ndarray) -> np.ndarray:
    """Physical samples -> Fourier-series coefficients over the last d axes."""
    axes = tuple(range(-grid.dimension, 0))
    return scipy.fft.fftn(values, axes=axes, norm="forward", workers=_FFT_WORKERS)


def inverse(grid: TorusGrid, coeffs: np.ndarray) -> np.ndarray:
    """Fourier-series coefficients -> real physical samples."""
    axes = tuple(range(-grid.dimension, 0))
    out = scipy.fft.ifftn(coeffs, axes=axes, norm="forward", workers=_FFT_WORKERS)
    return out.real


@dataclass(frozen=True)
class SpectralVectorField:
    """A d-component real vector field held as Fourier coefficients.

    ``coeffs`` has shape ``(d,) + grid.shape`` in FFT order.  The flags record
    structural properties that callers rely on; use :func:`divergence_residual`
    and :func:`hermitian_defect` to audit them.
    """

    grid: TorusGrid
    coeffs: np.ndarray
    mean_zero: bool = False
    div_free: bool = False

    def __post_init__(self) -> None:
        expected = (self.grid.dimension,) + self.grid.shape
        if self.coeffs.shape != expected:
            raise ValueError(f"coeffs shape {self.coeffs.shape} != {expected}")

    @classmethod
    def from_physical(
        cls, grid: TorusGrid, values: np.ndarray, *, mean_zero: bool = False, div_free: bool = False
    ) -> SpectralVectorField:
        values = np.asarray(values, dtype=float)
        return cls(grid, forward(grid, values).astype(complex), mean_zero, div_free)

    @classmethod
    def zeros(cls, grid: TorusGrid) -> SpectralVectorField:
        shape = (grid.dimension,) + grid.shape
        return cls(grid, np.zeros(shape, dtype=complex), True, True)

    def to_physical(self) -> np.ndarray:
        return inverse(self.grid, self.coeffs)

    def with_coeffs(self, coeffs: np.ndarray, **flags: bool) -> SpectralVectorField:
        return replace(self, coeffs=coeffs, **flags)


def _check_gamma(gamma: float) -> None:
    if not 0.0 < gamma <= 2.0:
        raise ValueError(f"gamma must lie in (0, 2], got {gamma}")


def semigroup_symbol(grid: TorusGrid, gamma: float, t: float) -> np.ndarray:
    """exp(-t |xi|**gamma) on the coefficient grid."""
    _check_gamma(gamma)
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    return np.exp(-t * grid.k_norm**gamma)


def apply_semigroup(u: SpectralVectorField, gamma: float, t: float) -> SpectralVectorField:
    """Multiply every coefficient by exp(-t |xi|**gamma)."""
    if t == 0:
        return u.with_coeffs(u.coeffs.copy())
    return u.with_coeffs(u.coeffs * semigroup_symbol(u.grid, gamma, t))


def project_coeffs(grid: TorusGrid, coeffs: np.ndarray) -> np.ndarray:
    """Apply I - k k^T/|k|^2 with the derivative wavevector; k = 0 untouched."""
    k = grid.deriv_wavevector
    k2 = sum(ki**2 for ki in k)
    k2 = np.where(k2 == 0.0, 1.0, k2)
    kdotc = sum(ki * coeffs[i] for i, ki in enumerate(k))
    return np.stack([coeffs[i] - ki * kdotc / k2 for i, ki in enumerate(k)])


def leray_project(u: SpectralVectorField) -> SpectralVectorField:
    """Helmholtz-Leray projection onto divergence-free fields."""
    return u.with_coeffs(project_coeffs(u.grid, u.coeffs), div_free=True)


def fractional_derivative(u: SpectralVectorField, alpha: float) -> SpectralVectorField:
    """Apply Lambda**alpha = (-Delta)**(alpha/2), symbol |xi|**alpha.

    The zero mode is cleared for ``alpha > 0``.  Negative orders are only
    defined on mean-zero fields.
    """
    if not -1.0 <= alpha <= 2.0:
        raise ValueError(f"alpha must lie in [-1, 2], got {alpha}")
    if alpha == 0:
        return u.with_coeffs(u.coeffs.copy())
    if alpha < 0 and not u.mean_zero:
        raise ValueError("negative fractional order requires a mean-zero field")
    return u.with_coeffs(u.coeffs * _abs_power(u.grid, alpha), mean_zero=True)


def _abs_power(grid: TorusGrid, alpha: float) -> np.ndarray:
    kn = grid.k_norm
    with np.errstate(divide="ignore"):
        sym = np.where(kn == 0.0, 0.0, kn**alpha)
    return sym


def derivative_symbol(grid: TorusGrid, multi_index) -> np.ndarray:
    """prod_i (i xi_i)**m_i with Nyquist entries zeroed."""
    m = tuple(int(v) for v in multi_index)
    if len(m) != grid.dimension:
        raise ValueError(f"multi_index needs {grid.dimension} entries, got {len(m)}")
    if any(v < 0 for v in m) or sum(m) > 40:
        raise ValueError("multi_index entries must be >= 0 with total order <= 40")
    sym = np.ones(grid.shape, dtype=complex)
    for ki, mi in zip(grid.deriv_wavevector, m):
        if mi:
            sym = sym * (1j * ki) ** mi
    return sym


def partial_derivative(u: SpectralVectorField, multi_index) -> SpectralVectorField:
    """Apply the mixed partial derivative d^m to every component."""
    sym = derivative_symbol(u.grid, multi_index)
    mean_zero = u.mean_zero or any(int(v) > 0 for v in multi_index)
    return u.with_coeffs(u.coeffs * sym, mean_zero=mean_zero)


def dealias(grid: TorusGrid, coeffs: np.ndarray) -> np.ndarray:
    return coeffs * grid.dealias_mask


def divergence_residual(u: SpectralVectorField) -> float:
    """max |sum_i xi_i c_i(xi)| relative to max |c|; 0 for the zero field."""
    scale = np.abs(u.coeffs).max()
    if scale == 0:
        return 0.0
    div = sum(ki * u.coeffs[i] for i, ki in enumerate(u.grid.deriv_wavevector))
    return float(np.abs(div).max() / scale)


def hermitian_defect(grid: TorusGrid, coeffs: np.ndarray) -> float:
    """max |c(-xi) - conj(c(xi))| relative to max |c|."""
    scale = np.abs(coeffs).max()
    if scale == 0:
        return 0.0
    axes = tuple(range(-grid.dimension, 0))
    flipped = np.roll(np.flip(coeffs, axis=axes), 1, axis=axes)
    return float(np.abs(flipped - np.conj(coeffs)).max() / scale)


def _half(grid: TorusGrid, coeffs: np.ndarray) -> np.ndarray:
    return coeffs[..., : grid.points_per_axis // 2 + 1]


def _expand_half(grid: TorusGrid, half: np.ndarray) -> np.ndarray:
    """Rebuild the full coefficient array of a real field from its last-axis half."""
    n = grid.points_per_axis
    full = np.empty(half.shape[:-1] + (n,), dtype=complex)
    full[..., : n // 2 + 1] = half
    mirror = half[..., 1 : n // 2][..., ::-1]
    other = tuple(range(-grid.dimension, -1))
    if other:
        mirror = np.roll(np.flip(mirror, axis=other), 1, axis=other)
    full[..., n // 2 + 1 :] = np.conj(mirror)
    return full


def _physical_from_half(grid: TorusGrid, half: np.ndarray) -> np.ndarray:
    axes = tuple(range(-grid.dimension, 0))
    shape = grid.shape
    return scipy.fft.irfftn(half, s=shape, axes=axes, norm="forward", workers=_FFT_WORKERS)


def _half_from_physical(grid: TorusGrid, values: np.ndarray) -> np.ndarray:
    axes = tuple(range(-grid.dimension, 0))
    return scipy.fft.rfftn(values, axes=axes, norm="forward", workers=_FFT_WORKERS)


def quadratic_products(grid: TorusGrid, coeffs: np.ndarray) -> dict[tuple[int, int], np.ndarray]:
    """Dealiased coefficients of u_j u_m for j <= m.

    Uses real-to-complex transforms, so ``coeffs`` must be Hermitian; the
    dealiasing mask removes the Nyquist planes where that could fail.
    """
    mask = _half(grid, grid.dealias_mask)
    phys = _physical_from_half(grid, _half(grid, coeffs) * mask)
    d = grid.dimension
    out = {}
    for j in range(d):
        for m in range(j, d):
            out[j, m] = _expand_half(grid, _half_from_physical(grid, phys[j] * phys[m]) * mask)
    return out


def nonlinear_term(u: SpectralVectorField, dealias_rule: str = "2/3") -> SpectralVectorField:
    """Leray-projected div(u (x) u) with 2/3-rule truncation around the product.

    Raises:
        ValueError: if ``u`` is not flagged divergence-free or the rule is unknown.
    """
    if dealias_rule != "2/3":
        raise ValueError(f"unsupported dealiasing rule {dealias_rule!r}")
    if not u.div_free:
        raise ValueError("nonlinear_term requires a divergence-free field")
    grid = u.grid
    prod = quadratic_products(grid, u.coeffs)
    k = grid.deriv_wavevector
    d = grid.dimension
    div = np.stack(
        [sum(1j * k[m] * prod[min(j, m), max(j, m)] for m in range(d)) for j in range(d)]
    )
    return SpectralVectorField(grid, project_coeffs(grid, div), mean_zero=True, div_free=True)


def scalar_lp_norm(grid: TorusGrid, values: np.ndarray, p: float) -> float:
    """L^p norm of non-negative physical samples by uniform-weight quadrature."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if math.isinf(p):
        return float(np.max(values))
    if p == 2:
        return float(math.sqrt(np.sum(values**2) * grid.cell_volume))
    if p == 1:
        return float(np.sum(values) * grid.cell_volume)
    peak = float(np.max(values))
    if peak == 0:
        return 0.0
    return peak * float(np.sum((values / peak) ** p) * grid.cell_volume) ** (1.0 / p)


def lp_norm(u: SpectralVectorField, p: float) -> float:
    """L^p norm of the pointwise Euclidean magnitude of ``u``."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    phys = u.to_physical()
    mag = np.sqrt(np.sum(phys**2, axis=0))
    return scalar_lp_norm(u.grid, mag, p)


def inner_product(u: SpectralVectorField, v: SpectralVectorField) -> float:
    """Real L^2 inner product via Parseval."""
    return float((TWO_PI**u.grid.dimension) * np.real(np.vdot(u.coeffs, v.coeffs)))


def energy(u: SpectralVectorField) -> float:
    """||u||_2**2."""
    return float((TWO_PI**u.grid.dimension) * np.sum(np.abs(u.coeffs) ** 2))
