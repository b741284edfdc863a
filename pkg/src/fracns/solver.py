"""Mild solutions of the fractionally dissipated Navier-Stokes equations on T^2.

The equation u_t + P div(u (x) u) + Lambda^gamma u = 0 is integrated in
Duhamel form,

    u(t + h) = E(h) u(t) - int_0^h E(h - s) N(u(t + s)) ds,
    E(h) = exp(-h |xi|^gamma),  N(u) = P div(u (x) u),

either by exponential Runge-Kutta steps or by Picard iteration on short
slabs, restarting from the end state of each slab.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import spectral as sp
from .spectral import SpectralVectorField, TorusGrid

__all__ = [
    "InitialSpec",
    "SolverConfig",
    "ContractionDiag",
    "TrajectoryRecord",
    "PicardDivergence",
    "SimulationAborted",
    "phi_functions",
    "init_field",
    "step_exponential",
    "picard_slab",
    "simulate",
    "exact_solution",
    "recover_pressure",
    "kato_exponent",
    "kato_norm_tracker",
]

METHODS = ("exp_euler", "etd2", "picard_slab")
INITIAL_KINDS = ("shear", "taylor_green", "gevrey_random", "file")
_BLOWUP_FACTOR = 1e6


class PicardDivergence(RuntimeError):
    """Picard iteration on a slab failed to converge."""

    def __init__(self, message: str, diag: ContractionDiag):
        super().__init__(message)
        self.diag = diag


class SimulationAborted(RuntimeError):
    """The run produced non-finite values or runaway energy."""

    def __init__(self, message: str, last_valid_time: float):
        super().__init__(message)
        self.last_valid_time = last_valid_time


@dataclass(frozen=True)
class InitialSpec:
    """Initial data description; ``path`` is used only for ``kind == "file"``."""

    kind: str = "gevrey_random"
    amplitude: float = 1.0
    gevrey_radius: float = 0.3
    seed: int = 0
    path: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in INITIAL_KINDS:
            raise ValueError(f"unknown initial kind {self.kind!r}; choose from {INITIAL_KINDS}")
        if self.gevrey_radius < 0:
            raise ValueError("gevrey_radius must be >= 0")
        if self.kind == "file" and not self.path:
            raise ValueError("file initial data needs a path")


def _check_q(q: float, gamma: float, d: int) -> None:
    if not q > d / (gamma - 1.0):
        raise ValueError(f"q = {q} violates q > d/(gamma-1) = {d / (gamma - 1.0):.6g}")


@dataclass(frozen=True)
class SolverConfig:
    """A complete solver run.

    Attributes:
        gamma: Dissipation order in (1, 2].
        n: Points per axis of the 2-D torus grid.
        t_end: Final time.
        slab_dt: Step (or Picard slab) length.
        method: One of ``exp_euler``, ``etd2``, ``picard_slab``.
        picard_tol: Relative update tolerance for Picard iteration.
        picard_max_iter: Iteration cap per slab.
        picard_nodes: Uniform collocation nodes per slab, endpoints included.
        initial: Initial data.
        output_every: Record diagnostics every this many steps.
        q_list: Lebesgue exponents tracked besides 2 and infinity.
        store_snapshots: Keep the field at every recorded time.
    """

    gamma: float = 1.5
    n: int = 256
    t_end: float = 1.0
    slab_dt: float = 1e-3
    method: str = "etd2"
    picard_tol: float = 1e-10
    picard_max_iter: int = 50
    picard_nodes: int = 4
    initial: InitialSpec = field(default_factory=InitialSpec)
    output_every: int = 1
    q_list: tuple[float, ...] = (6.0,)
    store_snapshots: bool = False

    def __post_init__(self) -> None:
        if not 1.0 < self.gamma <= 2.0:
            raise ValueError(f"gamma must lie in (1, 2], got {self.gamma}")
        if self.slab_dt <= 0 or self.t_end <= 0:
            raise ValueError("slab_dt and t_end must be positive")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if not 0 < self.picard_tol <= 1e-3:
            raise ValueError("picard_tol must lie in (0, 1e-3]")
        if self.picard_max_iter < 1 or self.picard_nodes < 2 or self.output_every < 1:
            raise ValueError("picard_max_iter, output_every >= 1 and picard_nodes >= 2 required")
        for q in self.q_list:
            _check_q(q, self.gamma, 2)
        sp.make_grid(2, self.n)

    @property
    def grid(self) -> TorusGrid:
        return sp.make_grid(2, self.n)

    @property
    def steps(self) -> int:
        return max(1, round(self.t_end / self.slab_dt))

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["q_list"] = [_q_to_json(q) for q in self.q_list]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> SolverConfig:
        """Build a config, rejecting unknown keys at every level."""
        data = dict(data)
        _reject_unknown(data, {f.name for f in dataclasses.fields(cls)}, "config")
        if "initial" in data:
            init = data["initial"]
            if not isinstance(init, dict):
                raise ValueError("config.initial must be an object")
            _reject_unknown(init, {f.name for f in dataclasses.fields(InitialSpec)}, "config.initial")
            data["initial"] = InitialSpec(**init)
        if "q_list" in data:
            data["q_list"] = tuple(_q_from_json(q) for q in data["q_list"])
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> SolverConfig:
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _q_to_json(q: float):
    return "inf" if math.isinf(q) else q


def _q_from_json(q) -> float:
    return math.inf if q in ("inf", "Infinity") else float(q)


def _reject_unknown(data: dict, allowed: set, where: str) -> None:
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ValueError(f"unknown keys in {where}: {', '.join(unknown)}")


@dataclass(frozen=True)
class ContractionDiag:
    """Picard history on one slab.

    ``updates`` holds the relative update size of every iteration and
    ``contraction_factors`` the ratios of successive updates.
    """

    iterations: int
    updates: tuple[float, ...]
    contraction_factors: tuple[float, ...]
    converged: bool

    @property
    def max_factor(self) -> float:
        return max(self.contraction_factors, default=0.0)


@dataclass
class TrajectoryRecord:
    """Diagnostics recorded at the output cadence of a run.

    ``norm_series`` maps each exponent q to the array of ||u(t)||_q, and
    ``kato_running`` maps q to the running sup of t^alpha ||u(t)||_q.
    """

    gamma: float
    times: list[float] = field(default_factory=list)
    snapshots: list[SpectralVectorField] = field(default_factory=list)
    norm_series: dict[float, list[float]] = field(default_factory=dict)
    energy_series: list[float] = field(default_factory=list)
    dissipation_series: list[float] = field(default_factory=list)
    contraction_diags: list[ContractionDiag] = field(default_factory=list)
    kato_running: dict[float, list[float]] = field(default_factory=dict)
    max_divergence: float = 0.0
    max_hermitian_defect: float = 0.0
    final: SpectralVectorField | None = None

    def norms(self, q: float) -> np.ndarray:
        return np.asarray(self.norm_series[q])


def phi_functions(h: np.ndarray, order: int) -> list[np.ndarray]:
    """phi_0..phi_order of h, with phi_0 = exp and phi_{j+1}(h) = (phi_j(h) - 1/j!)/h.

    A 30-term Taylor series is used where |h| < 1 to avoid cancellation.
    """
    h = np.asarray(h, dtype=float)
    small = np.abs(h) < 1.0
    hs = np.where(small, h, 0.0)
    hl = np.where(small, 1.0, h)
    out = [np.exp(h)]
    for j in range(1, order + 1):
        series = np.zeros_like(h)
        for m in range(29, -1, -1):
            series = series * hs + 1.0 / math.factorial(m + j)
        rec = (out[-1] - 1.0 / math.factorial(j - 1)) / hl
        if j == 1:
            rec = np.expm1(hl) / hl
        out.append(np.where(small, series, rec))
    return out


def _eigen(grid: TorusGrid, gamma: float) -> np.ndarray:
    return grid.k_norm**gamma


@lru_cache(maxsize=8)
def _step_phis(grid: TorusGrid, gamma: float, dt: float) -> list[np.ndarray]:
    return phi_functions(-dt * _eigen(grid, gamma), 2)


def _rhs(u: SpectralVectorField) -> np.ndarray:
    return -sp.nonlinear_term(u).coeffs


def init_field(spec: InitialSpec, grid: TorusGrid) -> SpectralVectorField:
    """Real, mean-zero, divergence-free initial data on a 2-D grid."""
    if spec.kind == "file":
        from .io import read_field_snapshot

        u, _, _ = read_field_snapshot(spec.path)
        if u.grid != grid:
            raise ValueError(f"snapshot grid {u.grid} does not match {grid}")
        return u
    if grid.dimension != 2:
        raise ValueError("initial data is defined on 2-D grids")
    if spec.kind in ("shear", "taylor_green"):
        return exact_solution(spec.kind, 2.0, spec.amplitude, 0.0, grid)
    rng = np.random.default_rng(spec.seed)
    noise = rng.standard_normal((2,) + grid.shape)
    c = sp.forward(grid, noise)
    mag = np.abs(c)
    phases = np.where(mag > 0, c / np.where(mag > 0, mag, 1.0), 0.0)
    coeffs = spec.amplitude * np.exp(-spec.gevrey_radius * grid.k_norm) * phases
    coeffs = sp.dealias(grid, sp.project_coeffs(grid, coeffs))
    coeffs[(slice(None),) + (0,) * grid.dimension] = 0.0
    return SpectralVectorField(grid, coeffs, mean_zero=True, div_free=True)


def step_exponential(u: SpectralVectorField, gamma: float, dt: float, method: str = "etd2") -> SpectralVectorField:
    """One exponential-integrator step of the Duhamel formula.

    ``exp_euler`` freezes N at the left endpoint; ``etd2`` is the two-stage
    ETD2RK scheme with the phi_2 correction.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    phi0, phi1, phi2 = _step_phis(u.grid, float(gamma), float(dt))
    n0 = _rhs(u)
    a = phi0 * u.coeffs + dt * phi1 * n0
    if method == "exp_euler":
        return u.with_coeffs(a, mean_zero=True, div_free=True)
    if method != "etd2":
        raise ValueError(f"unknown step method {method!r}")
    ua = u.with_coeffs(a, mean_zero=True, div_free=True)
    out = a + dt * phi2 * (_rhs(ua) - n0)
    return u.with_coeffs(out, mean_zero=True, div_free=True)


def _rel_norm(delta: np.ndarray, ref: np.ndarray) -> float:
    with np.errstate(over="ignore", invalid="ignore"):
        return _rel_norm_raw(delta, ref)


def _rel_norm_raw(delta: np.ndarray, ref: np.ndarray) -> float:
    scale = float(np.sqrt(np.sum(np.abs(ref) ** 2)))
    size = float(np.sqrt(np.sum(np.abs(delta) ** 2)))
    return size / scale if scale > 0 else size


def picard_slab(u_start: SpectralVectorField, gamma: float, dt: float, tol: float = 1e-10,
                max_iter: int = 50, nodes: int = 4) -> tuple[SpectralVectorField, ContractionDiag]:
    """Fixed-point iteration for the Duhamel formula on one slab [0, dt].

    The field is carried at ``nodes`` uniform times s_i = i dt/(nodes-1).  The
    nonlinearity is interpolated by the polynomial through its node values,
    N(s) = sum_j a_j s^j, and integrated exactly against the semigroup:

        int_0^tau E(tau - s) s^j ds = j! tau^{j+1} phi_{j+1}(-tau lambda).

    Raises:
        PicardDivergence: if the update has not dropped below ``tol`` relative
            to the solution after ``max_iter`` iterations; carries the history.
    """
    if dt <= 0 or nodes < 2:
        raise ValueError("dt must be positive and nodes >= 2")
    grid = u_start.grid
    lam = _eigen(grid, gamma)
    s = np.linspace(0.0, dt, nodes)
    inv_vander = np.linalg.inv(np.vander(s, nodes, increasing=True))
    weights = []
    for tau in s[1:]:
        phis = phi_functions(-tau * lam, nodes)
        row = [math.factorial(j) * tau ** (j + 1) * phis[j + 1] for j in range(nodes)]
        weights.append((phis[0], row))
    u0 = u_start.coeffs
    states = [u0] + [w[0] * u0 for w in weights]
    updates: list[float] = []
    for it in range(1, max_iter + 1):
        rhs = [_rhs(u_start.with_coeffs(c, mean_zero=True, div_free=True)) for c in states]
        mono = np.tensordot(inv_vander, np.stack(rhs), axes=([1], [0]))
        new = [u0]
        for decay, row in weights:
            new.append(decay * u0 + sum(row[j] * mono[j] for j in range(nodes)))
        update = max(_rel_norm(a - b, a) for a, b in zip(new[1:], states[1:]))
        states = new
        updates.append(update)
        if update <= tol:
            diag = _diag(it, updates, True)
            return u_start.with_coeffs(states[-1], mean_zero=True, div_free=True), diag
        if not math.isfinite(update):
            break
    diag = _diag(len(updates), updates, False)
    raise PicardDivergence(
        f"Picard iteration did not reach tol {tol:g} in {max_iter} iterations "
        f"(last update {updates[-1]:.3e}, contraction factors {list(diag.contraction_factors)[-3:]})",
        diag,
    )


def _diag(iterations: int, updates: list[float], converged: bool) -> ContractionDiag:
    factors = tuple(b / a for a, b in zip(updates[:-1], updates[1:]) if a > 0)
    return ContractionDiag(iterations, tuple(updates), factors, converged)


def kato_exponent(gamma: float, d: int, q: float) -> float:
    """alpha = 1 - 1/gamma - d/(q gamma)."""
    inv_q = 0.0 if math.isinf(q) else 1.0 / q
    return 1.0 - 1.0 / gamma - d * inv_q / gamma


def _dissipation(u: SpectralVectorField, gamma: float) -> float:
    return 2.0 * sp.energy(sp.fractional_derivative(u, gamma / 2.0))


def simulate(config: SolverConfig, *, observer=None) -> TrajectoryRecord:
    """Advance the configured initial data to ``t_end``.

    Records, at t = 0 and every ``output_every`` steps: ||u||_q for
    q in q_list and {2, inf}, the energy ||u||_2^2, the dissipation rate
    2||Lambda^{gamma/2} u||_2^2 and the running Kato sup.  ``observer``, if
    given, is called as ``observer(t, u)`` at each recorded time.

    Raises:
        PicardDivergence: propagated from a failing slab.
        SimulationAborted: on non-finite coefficients or energy above 1e6
            times its initial value; carries the last valid time.
    """
    grid = config.grid
    u = init_field(config.initial, grid)
    qs = sorted(set(config.q_list) | {2.0, math.inf})
    traj = TrajectoryRecord(gamma=config.gamma, norm_series={q: [] for q in qs},
                            kato_running={q: [] for q in config.q_list})
    e0 = sp.energy(u)

    def record(t: float, u: SpectralVectorField) -> None:
        traj.times.append(t)
        for q in qs:
            traj.norm_series[q].append(sp.lp_norm(u, q))
        for q in config.q_list:
            val = t ** kato_exponent(config.gamma, 2, q) * traj.norm_series[q][-1]
            prev = traj.kato_running[q][-1] if traj.kato_running[q] else 0.0
            traj.kato_running[q].append(max(prev, val))
        traj.energy_series.append(sp.energy(u))
        traj.dissipation_series.append(_dissipation(u, config.gamma))
        traj.max_divergence = max(traj.max_divergence, sp.divergence_residual(u))
        traj.max_hermitian_defect = max(traj.max_hermitian_defect, sp.hermitian_defect(grid, u.coeffs))
        if config.store_snapshots:
            traj.snapshots.append(u)
        if observer is not None:
            observer(t, u)

    record(0.0, u)
    dt = config.slab_dt
    for step in range(1, config.steps + 1):
        if config.method == "picard_slab":
            u, diag = picard_slab(u, config.gamma, dt, config.picard_tol, config.picard_max_iter,
                                  config.picard_nodes)
            traj.contraction_diags.append(diag)
        else:
            u = step_exponential(u, config.gamma, dt, config.method)
        t = step * dt
        e = sp.energy(u)
        if not (np.all(np.isfinite(u.coeffs)) and math.isfinite(e)) or e > _BLOWUP_FACTOR * max(e0, 1e-300):
            raise SimulationAborted(f"run aborted at step {step}: non-finite or runaway energy",
                                    traj.times[-1])
        if step % config.output_every == 0 or step == config.steps:
            record(t, u)
    traj.final = u
    return traj


def exact_solution(kind: str, gamma: float, A: float, t: float, grid: TorusGrid) -> SpectralVectorField:
    """Closed-form solutions: decaying shear and Taylor-Green vortices."""
    if grid.dimension != 2:
        raise ValueError("exact solutions are 2-D")
    x, y = grid.coordinates()
    if kind == "shear":
        amp = A * math.exp(-t)
        vals = np.stack([amp * np.sin(y) + 0.0 * x, 0.0 * (x + y)])
    elif kind == "taylor_green":
        amp = A * math.exp(-(2.0 ** (gamma / 2.0)) * t)
        vals = np.stack([amp * np.sin(x) * np.cos(y), -amp * np.cos(x) * np.sin(y)])
    else:
        raise ValueError(f"no exact solution for {kind!r}")
    return SpectralVectorField.from_physical(grid, vals, mean_zero=True, div_free=True)


def recover_pressure(u: SpectralVectorField) -> np.ndarray:
    """Mean-zero pressure coefficients p(xi) = -sum xi_j xi_m (u_j u_m)^(xi) / |xi|^2."""
    grid = u.grid
    prod = sp.quadratic_products(grid, u.coeffs)
    k = grid.deriv_wavevector
    d = grid.dimension
    k2 = sum(ki**2 for ki in k)
    acc = sum(k[j] * k[m] * prod[min(j, m), max(j, m)] for j in range(d) for m in range(d))
    return np.where(k2 == 0, 0.0, -acc / np.where(k2 == 0, 1.0, k2))


def kato_norm_tracker(traj: TrajectoryRecord, gamma: float, q: float, d: int = 2) -> float:
    """sup over recorded t of t^alpha ||u(t)||_q, alpha = 1 - 1/gamma - d/(q gamma)."""
    _check_q(q, gamma, d)
    if q not in traj.norm_series:
        raise ValueError(f"trajectory has no L^{q} norms; add q to q_list")
    t = np.asarray(traj.times)
    return float(np.max(t ** kato_exponent(gamma, d, q) * traj.norms(q)))
