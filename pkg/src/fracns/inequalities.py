"""Elementary inequalities and recurrences behind the analyticity estimates.

Every check returns a report whose constants are measured; none of them are
taken from a proof.
"""

from __future__ import annotations

import math

import mpmath
import numpy as np

from . import spectral as sp
from .reports import EstimateReport, SequenceReport
from .spectral import TorusGrid

__all__ = [
    "hermite_eval",
    "hermite_ratio_table",
    "check_cramer_bound",
    "sup_closed_form",
    "sup_inequality_check",
    "sup_inequality_sequence",
    "g_sequence",
    "f_sequence",
    "stirling_ratio",
    "binomial_stirling_check",
    "leibniz_ratio",
    "fractional_leibniz_check",
]

CRAMER_THRESHOLD = 1.09
_EXTENDED_FROM = 60


def hermite_eval(n: int, x: float) -> float:
    """Physicists' Hermite polynomial H_n(x) from H_{n+1} = 2x H_n - 2n H_{n-1}.

    Degrees above 60 are evaluated with 50-digit arithmetic and rounded.
    """
    if not 0 <= n <= 200:
        raise ValueError(f"n must lie in [0, 200], got {n}")
    if n > _EXTENDED_FROM:
        with mpmath.workdps(50):
            xm = mpmath.mpf(x)
            h0, h1 = mpmath.mpf(1), 2 * xm
            for j in range(1, n):
                h0, h1 = h1, 2 * xm * h1 - 2 * j * h0
            return float(h1)
    if n == 0:
        return 1.0
    h0, h1 = 1.0, 2.0 * x
    for j in range(1, n):
        h0, h1 = h1, 2.0 * x * h1 - 2.0 * j * h0
    return h1


def hermite_ratio_table(n_max: int, x) -> np.ndarray:
    """|H_n(x)| e^{-x^2/2} / sqrt(2^n n!) for n = 0..n_max, rows indexed by n.

    Uses the normalized recurrence
    psi_{n+1} = sqrt(2/(n+1)) x psi_n - sqrt(n/(n+1)) psi_{n-1},
    which stays O(1) where H_n itself overflows.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty((n_max + 1,) + x.shape)
    prev = np.zeros_like(x)
    cur = np.exp(-(x**2) / 2.0)
    out[0] = cur
    for n in range(n_max):
        prev, cur = cur, math.sqrt(2.0 / (n + 1)) * x * cur - math.sqrt(n / (n + 1)) * prev
        out[n + 1] = cur
    return np.abs(out)


def check_cramer_bound(n_max: int, x_grid) -> EstimateReport:
    """max over n <= n_max and the grid of |H_n(x)| e^{-x^2/2} / sqrt(2^n n!)."""
    if not 0 <= n_max <= 100:
        raise ValueError(f"n_max must lie in [0, 100], got {n_max}")
    x = np.asarray(x_grid, dtype=float)
    table = hermite_ratio_table(n_max, x)
    n_star, i_star = np.unravel_index(np.argmax(table), table.shape)
    sup = float(table[n_star, i_star])
    extras = {"n_at_max": int(n_star), "x_at_max": float(x[i_star])}
    return EstimateReport("cramer_bound", {"n_max": n_max}, sup, sup, CRAMER_THRESHOLD, extras)


def sup_closed_form(k: int, d: int) -> tuple[float, float]:
    """sup_{x>0} x^m exp(-x^2/8) with m = k+d+2: value (4m/e)^{m/2} at x = 2 sqrt(m)."""
    m = k + d + 2
    return (4.0 * m / math.e) ** (m / 2.0), 2.0 * math.sqrt(m)


def _sup_normalized(k: int, d: int) -> float:
    m = k + d + 2
    log_sup = 0.5 * m * math.log(4.0 * m / math.e)
    return math.exp((log_sup - 0.5 * k * math.log(k)) / (k + 1))


def sup_inequality_sequence(d: int, k_max: int = 200) -> EstimateReport:
    """Boundedness of (sup / k^{k/2})^{1/(k+1)} over k = 1..k_max.

    The tail maximum over k in [k_max/2, k_max] must stay within 1.05 times
    the maximum over [k_max/4, k_max/2]; ``measured_sup`` is the largest
    normalized value over all k.
    """
    if d not in (1, 2, 3):
        raise ValueError(f"d must be 1, 2 or 3, got {d}")
    if k_max < 8:
        raise ValueError("k_max must be >= 8")
    ks = np.arange(1, k_max + 1)
    seq = np.array([_sup_normalized(int(k), d) for k in ks])
    plateau = float(seq[(ks >= k_max // 4) & (ks <= k_max // 2)].max())
    tail = float(seq[ks >= k_max // 2].max())
    extras = {"plateau_max": plateau, "tail_max": tail, "k_at_max": int(ks[np.argmax(seq)])}
    return EstimateReport("sup_inequality", {"d": d, "k_max": k_max}, float(seq.max()), tail,
                          1.05 * plateau, extras)


def sup_inequality_check(k: int, d: int, k_max: int = 200) -> EstimateReport:
    """Closed-form sup for one k, checked against the bound of the whole sequence.

    The threshold is the largest normalized value over 1..k_max, provided the
    sequence passes the tail-plateau test; otherwise it is the plateau bound.
    """
    if k < 1 or d not in (1, 2, 3):
        raise ValueError("need k >= 1 and d in {1, 2, 3}")
    seq = sup_inequality_sequence(d, max(k_max, k))
    threshold = seq.measured_sup if seq.passed else seq.threshold
    sup, x_star = sup_closed_form(k, d)
    return EstimateReport("sup_inequality", {"k": k, "d": d}, sup, _sup_normalized(k, d), threshold,
                          {"x_at_sup": x_star, "m": k + d + 2})


def _g_values(n_max: int) -> list[int]:
    g = [1]
    for n in range(1, n_max + 1):
        g.append(2 * sum(g[j] * g[n - 1 - j] for j in range(n)))
    return g


def g_sequence(n_max: int) -> SequenceReport:
    """G(0) = 1, G(n) = 2 sum G(j) G(n-1-j) in exact integers; bound constant 8.

    ``extras["closed_form_ok"]`` records G(n) == 2^n Catalan(n) for all n.
    """
    if not 0 <= n_max <= 64:
        raise ValueError(f"n_max must lie in [0, 64], got {n_max}")
    g = _g_values(n_max)
    closed = [2**n * math.comb(2 * n, n) // (n + 1) for n in range(n_max + 1)]
    normalized = [math.exp(math.log(v) / (n + 1)) for n, v in enumerate(g)]
    extras = {"closed_form_ok": g == closed, "measured_C": max(normalized)}
    return SequenceReport("G", g, normalized, 8.0, extras)


def _xlogx(v: float) -> float:
    return 0.0 if v == 0 else v * math.log(v)


def f_sequence(n_max: int, C: float, C1: float, N: int, gamma: float = 2.0) -> SequenceReport:
    """The F recurrence and its majorization F(n) <= (C1 C)^{n+1} n^{n/N} G(n).

    F(0) = C and, for n >= 1,

        F(n) = C1 n^{1/(N gamma)} F(n-1)
             + C1 sum_{j<n} n^{n/N} / (j^{j/N} (n-1-j)^{(n-1-j)/N}) F(j) F(n-1-j),

    with 0^0 = 1.  The recurrence runs in floating point and restarts in the
    log domain if anything overflows.  ``normalized`` holds F(n) divided by
    the majorant, so the report passes when every ratio is at most 1.
    """
    if C < 1 or C1 < 1 or N < 1:
        raise ValueError("need C, C1 >= 1 and N >= 1")
    if not 0 <= n_max <= 200:
        raise ValueError(f"n_max must lie in [0, 200], got {n_max}")
    log_g = [math.log(v) for v in _g_values(n_max)]
    try:
        with np.errstate(over="raise", invalid="raise"):
            log_f = _f_linear(n_max, C, C1, N, gamma)
        log_domain = False
    except (OverflowError, FloatingPointError):
        log_f = _f_log(n_max, C, C1, N, gamma)
        log_domain = True
    ratios = []
    for n in range(n_max + 1):
        log_major = (n + 1) * math.log(C1 * C) + _xlogx(n) / N + log_g[n]
        ratios.append(math.exp(log_f[n] - log_major))
    values = log_f if log_domain else [math.exp(v) for v in log_f]
    extras = {"log_domain": log_domain, "params": {"C": C, "C1": C1, "N": N, "gamma": gamma}}
    return SequenceReport("F", values, ratios, 1.0, extras)


def _f_linear(n_max, C, C1, N, gamma) -> list[float]:
    f = [float(C)]
    for n in range(1, n_max + 1):
        total = C1 * n ** (1.0 / (N * gamma)) * f[n - 1]
        scale = math.exp(_xlogx(n) / N)
        for j in range(n):
            w = scale / math.exp((_xlogx(j) + _xlogx(n - 1 - j)) / N)
            total += C1 * w * f[j] * f[n - 1 - j]
        if not math.isfinite(total):
            raise OverflowError(f"F({n}) overflows")
        f.append(total)
    return [math.log(v) for v in f]


def _f_log(n_max, C, C1, N, gamma) -> list[float]:
    lf = [math.log(C)]
    lc1 = math.log(C1)
    for n in range(1, n_max + 1):
        terms = [lc1 + math.log(n) / (N * gamma) + lf[n - 1]]
        for j in range(n):
            terms.append(lc1 + (_xlogx(n) - _xlogx(j) - _xlogx(n - 1 - j)) / N + lf[j] + lf[n - 1 - j])
        top = max(terms)
        lf.append(top + math.log(sum(math.exp(t - top) for t in terms)))
    return lf


def stirling_ratio(k: int, j: int, l: int, N: int) -> float:
    """binom(k, j) / (n^n / (n1^n1 n2^n2))^{1/N}, n1 = Nj+l-1, n2 = N(k-j), n = Nk+l."""
    n1, n2, n = N * j + l - 1, N * (k - j), N * k + l
    log_ratio = math.log(math.comb(k, j)) - (_xlogx(n) - _xlogx(n1) - _xlogx(n2)) / N
    return math.exp(log_ratio)


def binomial_stirling_check(N: int, k_max: int = 60) -> EstimateReport:
    """Max of the Stirling ratio over 0 <= j <= k, 1 <= l <= N, per k.

    Passes when the maximum over k in [k_max/2, k_max] is within 1.05 times
    the maximum over k in [k_max/6, k_max/2].
    """
    if not 1 <= N <= 8:
        raise ValueError(f"N must lie in [1, 8], got {N}")
    if not 6 <= k_max <= 60:
        raise ValueError(f"k_max must lie in [6, 60], got {k_max}")
    per_k = [max(stirling_ratio(k, j, l, N) for j in range(k + 1) for l in range(1, N + 1))
             for k in range(k_max + 1)]
    plateau = max(per_k[k_max // 6: k_max // 2 + 1])
    tail = max(per_k[k_max // 2:])
    extras = {"plateau_max": plateau, "per_k_max": per_k}
    return EstimateReport("binomial_stirling", {"N": N, "k_max": k_max}, max(per_k), tail,
                          1.05 * plateau, extras)


def _scalar_lambda(grid: TorusGrid, coeffs: np.ndarray, eps: float) -> np.ndarray:
    if eps == 0:
        return coeffs
    kn = grid.k_norm
    with np.errstate(divide="ignore"):
        return coeffs * np.where(kn == 0, 0.0, kn**eps)


def leibniz_ratio(grid: TorusGrid, f: np.ndarray, g: np.ndarray, epsilon: float, p: float) -> float:
    """||L(fg)||_{p/2} / (||L f||_p ||g||_p + ||L g||_p ||f||_p), L = Lambda^epsilon.

    ``f`` and ``g`` are physical samples of real scalar fields.
    """
    fc, gc = sp.forward(grid, f), sp.forward(grid, g)
    lhs_c = _scalar_lambda(grid, sp.forward(grid, f * g), epsilon)
    norm = lambda c, q: sp.scalar_lp_norm(grid, np.abs(sp.inverse(grid, c)), q)  # noqa: E731
    lhs = norm(lhs_c, p / 2.0)
    lf, lg = _scalar_lambda(grid, fc, epsilon), _scalar_lambda(grid, gc, epsilon)
    rhs = norm(lf, p) * norm(gc, p) + norm(lg, p) * norm(fc, p)
    return lhs / rhs if rhs > 0 else 0.0


def _random_band_limited(grid: TorusGrid, rng: np.random.Generator) -> np.ndarray:
    cutoff = rng.integers(1, grid.points_per_axis // 8 + 1)
    slope = rng.uniform(0.0, 2.0)
    c = sp.forward(grid, rng.standard_normal(grid.shape))
    kn = grid.k_norm
    with np.errstate(divide="ignore"):
        weight = np.where((kn > 0) & (kn <= cutoff), np.where(kn > 0, kn, 1.0) ** -slope, 0.0)
    return sp.inverse(grid, c * weight)


def fractional_leibniz_check(grid: TorusGrid, epsilon: float, p: float, trials: int = 1000,
                             seed: int = 0) -> EstimateReport:
    """Empirical Leibniz constant over seeded random band-limited mean-zero pairs.

    Each trial draws its own generator from ``SeedSequence(seed).spawn``, so
    results do not depend on evaluation order.  Passes when the running
    maximum grows by less than 5% over the second half of the trials.
    """
    if not 0.0 <= epsilon < 1.0:
        raise ValueError(f"epsilon must lie in [0, 1), got {epsilon}")
    if not 2.0 < p <= 12.0:
        raise ValueError(f"p must lie in (2, 12], got {p}")
    if trials < 2:
        raise ValueError("need at least two trials")
    running = []
    best = 0.0
    for child in np.random.SeedSequence(seed).spawn(trials):
        rng = np.random.default_rng(child)
        f = _random_band_limited(grid, rng)
        g = _random_band_limited(grid, rng)
        best = max(best, leibniz_ratio(grid, f, g, epsilon, p))
        running.append(best)
    half = running[trials // 2 - 1]
    growth = best / half - 1.0 if half > 0 else math.inf
    params = {"d": grid.dimension, "n": grid.points_per_axis, "epsilon": epsilon, "p": p}
    extras = {"empirical_Cp": best, "max_at_half": half, "trials": trials, "seed": seed}
    return EstimateReport("fractional_leibniz", params, best, growth, 0.05, extras)
