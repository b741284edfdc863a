"""Command-line interface.

Exit codes: 0 when everything ran and every check passed, 2 when a check
failed (or a run diverged), 1 on usage or configuration errors.  Every
command writes ``manifest.json`` into ``--out`` next to its outputs.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from . import analyticity as an
from . import inequalities as ineq
from . import io as fio
from . import kernels as kl
from . import solver as sv
from . import spectral as sp

__all__ = ["run_command", "main"]

EXIT_OK, EXIT_USAGE, EXIT_FAILED = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _float_list(text: str) -> list[float]:
    try:
        return [math.inf if v.strip() in ("inf", "Infinity") else float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _number(text: str) -> float:
    return _float_list(text)[0]


def _build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON configuration file")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory")
    common.add_argument("--seed", type=int, default=None, help="override random seeds")
    common.add_argument("--threads", type=int, default=1, help="FFT worker threads")

    parser = _Parser(prog="fracns", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"fracns {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("simulate", parents=[common], help="run the mild-solution solver")

    p = sub.add_parser("kernel-table", parents=[common], help="tabulate a heat or Oseen kernel")
    p.add_argument("--kind", choices=("heat", "oseen"), default="heat")
    p.add_argument("--gamma", type=float, default=1.5)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--j", type=int, default=1)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--k", type=int, default=0)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--extent", type=float, default=8.0)
    p.add_argument("--samples", type=int, default=65)
    p.add_argument("--fft-size", type=int, default=None)

    p = sub.add_parser("verify-kernels", parents=[common], help="weighted decay of Oseen kernels")
    p.add_argument("--gamma", type=float, default=1.5)
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--kmax", type=int, default=6)
    p.add_argument("--alpha", type=_float_list, default=[0.0, 0.5])
    p.add_argument("--j", type=int, default=1)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--extent", type=float, default=8.0)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--fft-size", type=int, default=None)
    p.add_argument("--threshold-factor", type=float, default=4.0)

    p = sub.add_parser("verify-lemma", parents=[common], help="L^p norms of kernel derivatives")
    p.add_argument("--gamma", type=float, default=1.5)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--kmax", type=int, default=4)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--p", type=_float_list, default=[1.0, 2.0, math.inf])
    p.add_argument("--extent", type=float, default=8.0)
    p.add_argument("--samples", type=int, default=257)

    p = sub.add_parser("radius", parents=[common], help="analyticity radius growth of a run")
    p.add_argument("--band", type=int, nargs=2, default=None, metavar=("LO", "HI"))
    p.add_argument("--window", type=float, nargs=2, default=(0.01, 0.1), metavar=("T0", "T1"))
    p.add_argument("--r0", type=float, default=None)
    p.add_argument("--tolerance", type=float, default=0.2)

    p = sub.add_parser("derivative-report", parents=[common], help="k^k derivative-bound certificate")
    p.add_argument("--snapshot", type=Path, default=None)
    p.add_argument("--times", type=_float_list, default=[0.05, 0.1, 0.5])
    p.add_argument("--qprime", type=_float_list, default=[6.0, 12.0, math.inf])
    p.add_argument("--kmax", type=int, default=12)
    p.add_argument("--axis", type=int, default=0)
    p.add_argument("--factor", type=float, default=10.0)

    p = sub.add_parser("bench-inequalities", parents=[common], help="elementary inequality bench")
    p.add_argument("--nmax", type=int, default=50)
    p.add_argument("--kmax", type=int, default=200)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--epsilon", type=float, default=0.5)
    p.add_argument("--p", type=float, default=6.0)
    p.add_argument("--n", type=int, default=128)

    p = sub.add_parser("recurrences", parents=[common], help="G and F sequences")
    p.add_argument("--nmax", type=int, default=40)
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--C1", type=float, default=1.0)
    p.add_argument("--N", type=int, default=1)
    p.add_argument("--gamma", type=float, default=2.0)
    return parser


_GLOBAL = ("config", "out", "seed", "threads", "command")
_SOLVER_COMMANDS = ("simulate", "radius", "derivative-report")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _params(args) -> dict:
    return {k: v for k, v in vars(args).items() if k not in _GLOBAL}


def _apply_json_params(args, parser) -> None:
    """For non-solver commands, a --config file supplies flag values by name."""
    data = json.loads(args.config.read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise ValueError("config file must hold a JSON object")
    allowed = {k.replace("_", "-"): k for k in _params(args)}
    unknown = sorted(k for k in data if k not in allowed and k not in allowed.values())
    if unknown:
        raise ValueError(f"unknown keys in config: {', '.join(unknown)}")
    for key, value in data.items():
        name = allowed.get(key, key)
        if isinstance(value, str) and value in ("inf", "Infinity"):
            value = math.inf
        elif isinstance(value, list):
            value = [math.inf if v in ("inf", "Infinity") else v for v in value]
        setattr(args, name, value)


def _solver_config(args) -> sv.SolverConfig:
    if args.config is None:
        raise ValueError(f"{args.command} requires --config")
    config = sv.SolverConfig.from_json(args.config)
    if args.seed is not None:
        config = dataclasses.replace(config, initial=dataclasses.replace(config.initial, seed=args.seed))
    return config


class _Run:
    def __init__(self, args):
        self.out = args.out
        self.outputs: list[str] = []
        self.ok = True

    def path(self, name: str) -> Path:
        p = self.out / name
        self.outputs.append(str(p))
        return p

    def check(self, passed: bool) -> None:
        self.ok = self.ok and bool(passed)


def _report_rows(reports) -> tuple[list[str], list[dict]]:
    rows = [r.row() for r in reports]
    cols: list[str] = []
    for row in rows:
        for c in row:
            if c not in cols:
                cols.append(c)
    return cols, rows


def _cmd_simulate(args, run: _Run) -> dict:
    config = _solver_config(args)
    write_snaps = config.store_snapshots
    counter = [0]

    def observer(t, u):
        if write_snaps:
            fio.write_field_snapshot(u, config.gamma, t, run.path(f"snapshot_{counter[0]:05d}.fns"))
            counter[0] += 1

    traj = sv.simulate(dataclasses.replace(config, store_snapshots=False), observer=observer)
    qs = sorted(traj.norm_series)
    cols = ["t", "energy", "dissipation"] + [f"norm_L{_qname(q)}" for q in qs]
    cols += [f"kato_L{_qname(q)}" for q in config.q_list]
    rows = []
    for i, t in enumerate(traj.times):
        row = {"t": t, "energy": traj.energy_series[i], "dissipation": traj.dissipation_series[i]}
        row.update({f"norm_L{_qname(q)}": traj.norm_series[q][i] for q in qs})
        row.update({f"kato_L{_qname(q)}": traj.kato_running[q][i] for q in config.q_list})
        rows.append(row)
    fio.write_csv(run.path("trajectory.csv"), cols, rows, {"t": "time"})
    if traj.contraction_diags:
        crow = [{"slab": i, "iterations": d.iterations, "max_contraction": d.max_factor,
                 "converged": d.converged} for i, d in enumerate(traj.contraction_diags)]
        fio.write_csv(run.path("contraction.csv"), list(crow[0]), crow)
    fio.write_field_snapshot(traj.final, config.gamma, traj.times[-1], run.path("final.fns"))
    return config.to_dict()


def _qname(q: float) -> str:
    return "inf" if math.isinf(q) else f"{q:g}"


def _cmd_kernel_table(args, run: _Run) -> dict:
    if args.kind == "heat":
        table = kl.heat_kernel_table(args.gamma, args.t, args.d, args.extent, args.samples, k=args.k,
                                     alpha=args.alpha, fft_size=args.fft_size)
    else:
        table = kl.oseen_kernel_table(args.gamma, args.t, args.d, args.j, args.m, args.k, args.alpha,
                                      args.extent, args.samples, fft_size=args.fft_size)
    fio.kernel_table_csv(table, run.path("kernel.csv"))
    return _params(args)


_DECAY_DEFAULTS = {1: (129, None), 2: (129, 512), 3: (33, 128)}


def _cmd_verify_kernels(args, run: _Run) -> dict:
    samples, fft = _DECAY_DEFAULTS[args.d]
    samples = args.samples or samples
    fft = args.fft_size or fft
    args.samples, args.fft_size = samples, fft
    reports = []
    for alpha in args.alpha:
        reports += kl.kernel_decay_sweep(args.gamma, args.d, args.kmax, alpha, (args.j, args.m),
                                         args.extent, samples, fft, args.threshold_factor)
    for r in reports:
        run.check(r.passed and math.isfinite(r.measured_sup))
    cols, rows = _report_rows(reports)
    fio.write_csv(run.path("kernel_decay.csv"), cols, rows)
    return _params(args)


def _cmd_verify_lemma(args, run: _Run) -> dict:
    reports = []
    for k in range(args.kmax + 1):
        alpha = args.alpha if (k + args.alpha >= 0.1 or (k == 0 and args.alpha == 0)) else None
        if alpha is None:
            continue
        for p in args.p:
            r = kl.verify_lemma_norms(args.gamma, args.d, k, alpha, p, extent=args.extent, samples=args.samples)
            run.check(r.extras["exponent_ok"])
            reports.append(r)
    cols, rows = _report_rows(reports)
    fio.write_csv(run.path("lemma_norms.csv"), cols, rows)
    return _params(args)


def _capture_run(config: sv.SolverConfig, times) -> tuple[sv.TrajectoryRecord, dict]:
    wanted = {round(t / config.slab_dt): t for t in times}
    kept = {}

    def observer(t, u):
        step = round(t / config.slab_dt)
        if step in wanted:
            kept[wanted[step]] = u

    traj = sv.simulate(dataclasses.replace(config, store_snapshots=False), observer=observer)
    return traj, kept


def _cmd_radius(args, run: _Run) -> dict:
    config = _solver_config(args)
    band = tuple(args.band) if args.band else (1, config.n // 3)
    r0 = config.initial.gevrey_radius if args.r0 is None else args.r0
    trace = an.RadiusTrace(band=band)

    def observer(t, u):
        try:
            est = an.estimate_radius(an.shell_spectrum(u), band=band)
        except ValueError:
            est = an.RadiusEstimate(math.nan, 0.0, 0, False, False)
        trace.append(t, est)

    cfg = dataclasses.replace(config, store_snapshots=False, t_end=max(config.t_end, args.window[1]))
    sv.simulate(cfg, observer=observer)
    rows = [{"t": t, "radius": r, "fit_r2": q, "reliable": ok}
            for t, r, q, ok in zip(trace.times, trace.radius, trace.fit_r2, trace.reliable)]
    fio.write_csv(run.path("radius_trace.csv"), ["t", "radius", "fit_r2", "reliable"], rows,
                  {"t": "time", "radius": "length"})
    target = 1.0 / config.gamma
    try:
        fit = an.radius_growth_fit(trace, r0, tuple(args.window))
        ok = abs(fit.slope - target) <= args.tolerance * target and fit.fit_r2 >= 0.9
        row = {"slope": fit.slope, "intercept": fit.intercept, "fit_r2": fit.fit_r2,
               "target": target, "passed": ok, "error": ""}
    except ValueError as exc:
        ok = False
        row = {"slope": math.nan, "intercept": math.nan, "fit_r2": math.nan, "target": target,
               "passed": False, "error": str(exc)}
    run.check(ok)
    fio.write_csv(run.path("radius_fit.csv"), list(row), [row])
    out = config.to_dict()
    out.update(band=list(band), window=list(args.window), r0=r0, tolerance=args.tolerance)
    return out


def _cmd_derivative_report(args, run: _Run) -> dict:
    if args.snapshot is not None:
        u, gamma, t = fio.read_field_snapshot(args.snapshot)
        fields = {t: u}
        cfg_dict = {"snapshot": str(args.snapshot)}
    else:
        config = _solver_config(args)
        gamma = config.gamma
        _, fields = _capture_run(dataclasses.replace(config, t_end=max(config.t_end, max(args.times))),
                                 args.times)
        cfg_dict = config.to_dict()
    rows = []
    for t, u in sorted(fields.items()):
        for qp in args.qprime:
            rep = an.derivative_bound_report(u, t, gamma, qp, args.kmax, axis=args.axis)
            ok = rep.max_constant <= args.factor * rep.baseline()
            run.check(ok)
            for k, (norm, c) in enumerate(zip(rep.norms, rep.constants)):
                rows.append({"t": t, "q_prime": qp, "k": k, "norm": norm, "c_k": c,
                             "max_c": rep.max_constant, "baseline_c": rep.baseline(), "passed": ok})
    fio.write_csv(run.path("derivative_report.csv"),
                  ["t", "q_prime", "k", "norm", "c_k", "max_c", "baseline_c", "passed"], rows, {"t": "time"})
    cfg_dict.update(_params(args))
    return cfg_dict


def _cmd_bench(args, run: _Run) -> dict:
    seed = 0 if args.seed is None else args.seed
    reports = [ineq.check_cramer_bound(args.nmax, np.linspace(-10.0, 10.0, 20001))]
    reports += [ineq.sup_inequality_sequence(d, args.kmax) for d in (1, 2, 3)]
    reports += [ineq.binomial_stirling_check(N, 60) for N in (1, 2, 4)]
    reports.append(ineq.fractional_leibniz_check(sp.make_grid(2, args.n), args.epsilon, args.p,
                                                 args.trials, seed))
    for r in reports:
        run.check(r.passed)
    for r in reports:
        r.extras.pop("per_k_max", None)
    cols, rows = _report_rows(reports)
    fio.write_csv(run.path("inequalities.csv"), cols, rows)
    out = _params(args)
    out["seed"] = seed
    return out


def _cmd_recurrences(args, run: _Run) -> dict:
    g = ineq.g_sequence(min(args.nmax, 64))
    f = ineq.f_sequence(args.nmax, args.C, args.C1, args.N, args.gamma)
    run.check(g.passed and g.extras["closed_form_ok"])
    run.check(f.passed)
    rows = [{"sequence": "G", "n": n, "value": str(v), "normalized": x}
            for n, (v, x) in enumerate(zip(g.values, g.normalized))]
    value_kind = "log_value" if f.extras["log_domain"] else "value"
    rows += [{"sequence": "F", "n": n, "value": fio.format_float(v) if value_kind == "value" else "",
              "log_value": v if value_kind == "log_value" else "", "normalized": x}
             for n, (v, x) in enumerate(zip(f.values, f.normalized))]
    fio.write_csv(run.path("sequences.csv"), ["sequence", "n", "value", "log_value", "normalized"], rows)
    return _params(args)


_COMMANDS = {
    "simulate": _cmd_simulate,
    "kernel-table": _cmd_kernel_table,
    "verify-kernels": _cmd_verify_kernels,
    "verify-lemma": _cmd_verify_lemma,
    "radius": _cmd_radius,
    "derivative-report": _cmd_derivative_report,
    "bench-inequalities": _cmd_bench,
    "recurrences": _cmd_recurrences,
}


def run_command(argv) -> int:
    """Parse ``argv``, run the subcommand and return its exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(list(argv))
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        if args.config is not None and args.command not in _SOLVER_COMMANDS:
            _apply_json_params(args, parser)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError) as exc:
        print(f"fracns: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    sp.set_fft_workers(args.threads)
    run = _Run(args)
    started = _now()
    try:
        config = _COMMANDS[args.command](args, run)
    except (sv.PicardDivergence, sv.SimulationAborted) as exc:
        print(f"fracns: run failed: {exc}", file=sys.stderr)
        config, run.ok = _params(args), False
    except (OSError, ValueError) as exc:
        print(f"fracns: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    manifest = fio.RunManifest(args.command, fio.canonical_digest(config), __version__, started,
                               _now(), list(run.outputs), fio._jsonable(config))
    manifest.write(args.out / "manifest.json")
    return EXIT_OK if run.ok else EXIT_FAILED


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))
