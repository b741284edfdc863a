"""Spectral measures of spatial analyticity.

The analyticity radius is measured as the exponential type of the Fourier
coefficients: if max_{|xi| in [k, k+1)} |u(xi)| ~ exp(-r k), then r is the
radius.  This differs from the Taylor-series radius only by dimensional
constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import spectral as sp
from .reports import EstimateReport
from .solver import TrajectoryRecord, kato_exponent
from .spectral import SpectralVectorField

__all__ = [
    "shell_spectrum",
    "default_band",
    "RadiusEstimate",
    "estimate_radius",
    "RadiusTrace",
    "radius_trace",
    "GrowthFit",
    "radius_growth_fit",
    "DerivativeBoundReport",
    "derivative_bound_report",
    "lq_decay_check",
    "SobolevReport",
    "sobolev_norm",
    "sobolev_decay_report",
]

DEFAULT_FLOOR = 1e-13
_MIN_SHELLS = 5
_RELIABLE_R2 = 0.9


def shell_spectrum(u: SpectralVectorField) -> np.ndarray:
    """Max of |coeff| over each shell k <= |xi| < k+1, maximized over components."""
    shells = np.floor(u.grid.k_norm + 1e-9).astype(int).ravel()
    amp = np.abs(u.coeffs).max(axis=0).ravel()
    out = np.zeros(shells.max() + 1)
    np.maximum.at(out, shells, amp)
    return out


def default_band(n: int) -> tuple[int, int]:
    """Shells [n/8, n/3]: resolved and inside the 2/3 dealiasing cutoff."""
    return n // 8, n // 3


class RadiusEstimate(NamedTuple):
    radius: float
    fit_r2: float
    n_shells: int
    reliable: bool
    super_exponential: bool


def _linear_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    r2 = 1.0 if ss_tot <= 1e-30 * max(1.0, float(np.sum(y**2))) else max(0.0, 1.0 - ss_res / ss_tot)
    return float(slope), float(intercept), r2


def estimate_radius(spectrum, floor: float = DEFAULT_FLOOR, band: tuple[int, int] | None = None) -> RadiusEstimate:
    """Fit log(spectrum) against the shell index over ``band``.

    Shells whose value is at or below ``floor`` times the spectral maximum
    are dropped.  The estimate is unreliable when fewer than five shells
    remain or the fit R^2 is below 0.9.  A log-spectrum that is markedly
    concave (a quadratic fit explains the residual of the linear one) is
    flagged super-exponential.

    Raises:
        ValueError: if ``floor`` is not positive or no shell survives.
    """
    spec = np.asarray(spectrum, dtype=float)
    if floor <= 0:
        raise ValueError("floor must be positive")
    lo, hi = band if band is not None else (1, len(spec) - 1)
    kappa = np.arange(len(spec))
    sel = (kappa >= lo) & (kappa <= hi) & (spec > floor * spec.max()) if spec.max() > 0 else np.zeros_like(kappa, bool)
    if not np.any(sel):
        raise ValueError(f"no shell in band [{lo}, {hi}] lies above the floor")
    x, y = kappa[sel].astype(float), np.log(spec[sel])
    if len(x) < 2:
        return RadiusEstimate(0.0, 0.0, len(x), False, False)
    slope, _, r2 = _linear_fit(x, y)
    curved = False
    if len(x) >= 4:
        quad = np.polyfit(x, y, 2)
        rss_lin = float(np.sum((y - np.polyval(np.polyfit(x, y, 1), x)) ** 2))
        rss_quad = float(np.sum((y - np.polyval(quad, x)) ** 2))
        spread = float(np.sum((y - y.mean()) ** 2))
        curved = quad[0] < 0 and rss_lin > 1e-6 * spread and rss_lin > 10.0 * rss_quad
    reliable = len(x) >= _MIN_SHELLS and r2 >= _RELIABLE_R2 and not curved
    return RadiusEstimate(max(0.0, -slope), r2, int(len(x)), bool(reliable), bool(curved))


@dataclass
class RadiusTrace:
    """Radius estimates over time, with the shell band used for every fit."""

    times: list[float] = field(default_factory=list)
    radius: list[float] = field(default_factory=list)
    fit_r2: list[float] = field(default_factory=list)
    reliable: list[bool] = field(default_factory=list)
    band: tuple[int, int] = (1, 1)

    def append(self, t: float, est: RadiusEstimate) -> None:
        self.times.append(float(t))
        self.radius.append(est.radius)
        self.fit_r2.append(est.fit_r2)
        self.reliable.append(est.reliable)


def radius_trace(times, fields, band: tuple[int, int] | None = None, floor: float = DEFAULT_FLOOR) -> RadiusTrace:
    """Radius estimates for a sequence of snapshots.

    Snapshots with no shell above the floor get an unreliable NaN entry.
    """
    fields = list(fields)
    if band is None:
        band = default_band(fields[0].grid.points_per_axis)
    trace = RadiusTrace(band=band)
    for t, u in zip(times, fields):
        try:
            est = estimate_radius(shell_spectrum(u), floor, band)
        except ValueError:
            est = RadiusEstimate(math.nan, 0.0, 0, False, False)
        trace.append(t, est)
    return trace


class GrowthFit(NamedTuple):
    slope: float
    intercept: float
    fit_r2: float


def radius_growth_fit(trace: RadiusTrace, r0: float, window: tuple[float, float]) -> GrowthFit:
    """Fit log(radius - r0) against log t over the time window.

    Raises:
        ValueError: if the window holds fewer than two entries, an entry is
            unreliable, or radius(t) <= r0 somewhere in the window.
    """
    t = np.asarray(trace.times)
    r = np.asarray(trace.radius)
    sel = (t >= window[0]) & (t <= window[1]) & (t > 0)
    if sel.sum() < 2:
        raise ValueError(f"window {window} holds fewer than two trace entries")
    if not all(np.asarray(trace.reliable)[sel]):
        raise ValueError("trace has unreliable radius estimates inside the window")
    growth = r[sel] - r0
    if np.any(growth <= 0):
        bad = t[sel][growth <= 0][0]
        raise ValueError(f"no measurable growth: radius <= r0 = {r0} at t = {bad:.4g}")
    slope, intercept, r2 = _linear_fit(np.log(t[sel]), np.log(growth))
    return GrowthFit(slope, intercept, r2)


@dataclass(frozen=True)
class DerivativeBoundReport:
    """||D^k u(t)||_{q'} and c_k = (t^{k/gamma + alpha'} ||D^k u|| / max(k,1)^k)^{1/(k+1)}."""

    time: float
    q_prime: float
    alpha_prime: float
    norms: tuple[float, ...]
    constants: tuple[float, ...]

    @property
    def max_constant(self) -> float:
        return max(self.constants)

    def baseline(self, k_low: int = 2) -> float:
        return max(self.constants[: k_low + 1])


def _multi_indices(d: int, k: int, axis):
    if axis is not None:
        mi = [0] * d
        mi[axis] = k
        yield tuple(mi)
        return
    if d == 1:
        yield (k,)
        return
    for first in range(k + 1):
        for rest in _multi_indices(d - 1, k - first, None):
            yield (first,) + rest


def derivative_bound_report(u: SpectralVectorField, t: float, gamma: float, q_prime: float,
                            k_max: int, *, q: float | None = None, axis: int | None = 0) -> DerivativeBoundReport:
    """Derivative norms and their k^k-normalized constants at time t.

    Args:
        axis: Direction of the k-th derivative; ``None`` maximizes over all
            multi-indices of order k.
        q: Kato exponent of the run; when given, q' >= q is enforced.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    if not 0 <= k_max <= 16:
        raise ValueError(f"k_max must lie in [0, 16], got {k_max}")
    if q is not None and q_prime < q:
        raise ValueError(f"q' = {q_prime} must satisfy q' >= q = {q}")
    d = u.grid.dimension
    a = kato_exponent(gamma, d, q_prime)
    norms, consts = [], []
    for k in range(k_max + 1):
        norm = max(sp.lp_norm(sp.partial_derivative(u, mi), q_prime) for mi in _multi_indices(d, k, axis))
        norms.append(norm)
        consts.append((t ** (k / gamma + a) * norm / max(k, 1) ** k) ** (1.0 / (k + 1)))
    return DerivativeBoundReport(float(t), float(q_prime), a, tuple(norms), tuple(consts))


def lq_decay_check(traj: TrajectoryRecord, gamma: float, q_prime_list, d: int = 2) -> list[EstimateReport]:
    """sup_t t^{alpha'} ||u(t)||_{q'} per q', and where the sup is attained.

    ``extras["interior"]`` is true when the maximizing time is neither the
    first nor the last recorded time.
    """
    t = np.asarray(traj.times)
    out = []
    for qp in q_prime_list:
        if qp not in traj.norm_series:
            raise ValueError(f"trajectory has no L^{qp} norms")
        a = kato_exponent(gamma, d, qp)
        with np.errstate(divide="ignore"):
            weighted = np.where(t > 0, t**a, 0.0 if a > 0 else np.inf) * traj.norms(qp)
        i = int(np.argmax(weighted))
        sup = float(weighted[i])
        extras = {"alpha_prime": a, "t_star": float(t[i]), "interior": 0 < i < len(t) - 1}
        out.append(EstimateReport("lq_decay", {"gamma": gamma, "d": d, "p": qp}, sup, sup, math.inf, extras))
    return out


def sobolev_norm(u: SpectralVectorField, order: float) -> float:
    """Inhomogeneous H^s norm, weight (1 + |xi|^2)^{s/2}."""
    w = (1.0 + u.grid.k_norm**2) ** order
    return float(math.sqrt((sp.TWO_PI**u.grid.dimension) * np.sum(w * np.abs(u.coeffs) ** 2)))


@dataclass(frozen=True)
class SobolevReport:
    """H^k norms over time with decay verdicts.

    ``decay_error`` is the max relative deviation from a predicted single-rate
    exponential, when a rate was supplied.
    """

    times: tuple[float, ...]
    norms: dict
    eventually_decreasing: dict
    decay_error: dict

    @property
    def passed(self) -> bool:
        ok = all(self.eventually_decreasing.values())
        return ok and all(e <= 1e-8 for e in self.decay_error.values())


def sobolev_decay_report(traj: TrajectoryRecord, gamma: float, orders, *, rate: float | None = None) -> SobolevReport:
    """H^k norms of the stored snapshots.

    Args:
        rate: Predicted exponential decay rate (1 for shear, 2^{gamma/2}
            for Taylor-Green); when given, each series is compared with
            norm(0) exp(-rate t).

    Raises:
        ValueError: if the trajectory stored no snapshots.
    """
    if not traj.snapshots:
        raise ValueError("sobolev_decay_report needs stored snapshots")
    times = np.asarray(traj.times[: len(traj.snapshots)])
    norms, decreasing, errors = {}, {}, {}
    for k in orders:
        series = np.array([sobolev_norm(u, k) for u in traj.snapshots])
        norms[k] = series
        tail = series[len(series) // 2:]
        decreasing[k] = bool(np.all(np.diff(tail) <= 0))
        if rate is not None:
            pred = series[0] * np.exp(-rate * times)
            scale = np.where(pred > 0, pred, 1.0)
            errors[k] = float(np.max(np.abs(series - pred) / scale)) if series[0] > 0 else 0.0
    return SobolevReport(tuple(times.tolist()), norms, decreasing, errors)
