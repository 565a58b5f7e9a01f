"""Command-line front end.

Usage::

    rpimeasure <mode> --config <path> [--out <path>] [--seed <int>]

Relative output paths are placed under ``$RPIMEASURE_OUTPUT_DIR`` when it
is set. Exit status: 0 success, 2 ran but diagnostics were flagged,
1 error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .config import MODES, ConfigError, parse_config
from .errors import RPIError
from .master import evolve, steady_state
from .measurement import oscillator_model
from .moments import FIELDS, MomentParams, integrate_moments, moments_from_density, steady_moments
from .operators import coherent_state, fock_state, make_oscillator_ops, thermal_state
from .thermal import ThermalSpec, diffusion_coefficient, lambda_from_temperature, nbar
from .trajectories import run_trajectory
from .verify import format_table, run_checks

logger = logging.getLogger("rpimeasure")

OUTPUT_DIR_ENV = "RPIMEASURE_OUTPUT_DIR"
EXIT_OK, EXIT_ERROR, EXIT_FLAGGED = 0, 1, 2


def fmt(x):
    return format(float(x), ".17g")


def _write_csv(path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else fmt(v) for v in row])


def initial_state(cfg):
    if cfg.state_kind == "fock":
        return fock_state(cfg.dim, cfg.n)
    if cfg.state_kind == "thermal":
        return thermal_state(cfg.dim, cfg.nbar)
    return coherent_state(cfg.dim, cfg.alpha)


def _run_evolve(cfg, out):
    ops = make_oscillator_ops(cfg.dim, cfg.omega, cfg.hbar)
    m = oscillator_model(ops, cfg.kappa, cfg.lam)
    ser = evolve(initial_state(cfg), m, ops.H, cfg.t_final, cfg.dt,
                 output_stride=cfg.output_stride)
    rows = []
    for i, t in enumerate(ser.times):
        s = moments_from_density(ser.states[i], ops).as_array()
        rows.append([t, *s, ser.trace_drift[i], ser.min_eig[i], ser.leak[i]])
    _write_csv(out, ["t", *FIELDS, "trace_drift", "min_eig", "leak"], rows)
    return ser.flags


def _run_moments(cfg, out):
    ops = make_oscillator_ops(cfg.dim, cfg.omega, cfg.hbar)
    s0 = moments_from_density(initial_state(cfg), ops)
    p = MomentParams(cfg.omega, cfg.lam, cfg.kappa, cfg.hbar)
    series = integrate_moments(s0, p, cfg.t_final, cfg.dt, output_stride=cfg.output_stride)
    _write_csv(out, ["t", *FIELDS],
               ([t, *v] for t, v in zip(series.times, series.values)))
    return []


def _run_trajectories(cfg, out):
    ops = make_oscillator_ops(cfg.dim, cfg.omega, cfg.hbar)
    m = oscillator_model(ops, cfg.kappa, cfg.lam)
    rho0 = initial_state(cfg)
    P, Q = ops.P, ops.Q
    mops = (P, Q, P @ P, P @ Q + Q @ P, Q @ Q)
    rows = []
    stride = cfg.output_stride
    for j in range(cfg.n_traj):
        rec = run_trajectory(rho0, m, ops.H, cfg.t_final, cfg.dt, cfg.seed, index=j,
                             output_stride=stride)
        cols = [rec.expectation(X) for X in mops]
        for i in range(1, len(rec.times)):
            k = int(round(rec.times[i] / cfg.dt)) - 1
            rows.append([str(j), rec.times[i], rec.readouts[k], *(c[i] for c in cols)])
    _write_csv(out, ["traj", "t", "a", *FIELDS], rows)
    return []


def _run_steady(cfg, out):
    ops = make_oscillator_ops(cfg.dim, cfg.omega, cfg.hbar)
    m = oscillator_model(ops, cfg.kappa, cfg.lam)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ss = steady_state(m, ops.H)
    num = moments_from_density(ss, ops).as_array()
    rows = [["numerical", *num, ss.min_eigenvalue, ss.leak, ss.residual]]
    if cfg.lam > 0:
        cf = steady_moments(MomentParams(cfg.omega, cfg.lam, cfg.kappa, cfg.hbar)).as_array()
        rows.append(["closed_form", *cf, 0.0, 0.0, 0.0])
    _write_csv(out, ["source", *FIELDS, "min_eig", "leak", "residual"], rows)
    return ss.flags


def _run_thermal(cfg, out):
    if cfg.spacing == "log":
        temps = np.geomspace(cfg.t_min, cfg.t_max, cfg.n_points)
    else:
        temps = np.linspace(cfg.t_min, cfg.t_max, cfg.n_points)
    rows = []
    for T in temps:
        spec = ThermalSpec(float(T), cfg.omega, cfg.hbar, cfg.kB)
        lam = lambda_from_temperature(cfg.kappa, spec)
        rows.append([lam, T, nbar(spec), diffusion_coefficient(lam * cfg.omega, spec)])
    _write_csv(out, ["lambda", "T", "nbar", "D"], rows)
    return []


def _run_verify(cfg, out):
    results = run_checks()
    print(format_table(results))
    if out is not None:
        _write_csv(out, ["module", "check", "passed", "value", "tolerance"],
                   ([r.module, r.name, str(r.passed).lower(), r.value, r.tolerance]
                    for r in results))
    failed = [f"{r.module}: {r.name}" for r in results if not r.passed]
    return failed


RUNNERS = {
    "evolve": _run_evolve,
    "moments": _run_moments,
    "trajectories": _run_trajectories,
    "steady-state": _run_steady,
    "thermal-scan": _run_thermal,
    "verify": _run_verify,
}


def output_path(cfg, override=None):
    raw = override or cfg.path or f"{cfg.mode}.csv"
    p = Path(raw)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    return p


def run(cfg, out=None):
    """Execute ``cfg``; returns the exit code. Writes the CSV and ``<csv>.manifest.json``."""
    path = None if (cfg.mode == "verify" and out is None and cfg.path is None) \
        else output_path(cfg, out)
    try:
        flags = RUNNERS[cfg.mode](cfg, path)
    except RPIError as exc:
        logger.error("%s failed: %s", cfg.mode, exc)
        return EXIT_ERROR
    if cfg.mode == "verify":
        code = EXIT_OK if not flags else EXIT_ERROR
    else:
        code = EXIT_FLAGGED if flags else EXIT_OK
    for f in flags:
        logger.warning("flagged: %s", f)
    if path is not None:
        manifest = {"version": __version__, "mode": cfg.mode, "config": cfg.resolved(),
                    "seed": cfg.seed, "output": str(path), "flags": list(flags),
                    "exit_code": code}
        path.with_name(path.name + ".manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return code


def build_parser():
    ap = argparse.ArgumentParser(prog="rpimeasure", description=__doc__.split("\n\n")[0])
    ap.add_argument("mode", choices=MODES)
    ap.add_argument("--config", type=Path, help="INI configuration file")
    ap.add_argument("--out", help="CSV output path")
    ap.add_argument("--seed", type=int, help="overrides [trajectories] seed")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.config is None and args.mode != "verify":
        print(f"error: --config is required for mode {args.mode}", file=sys.stderr)
        return EXIT_ERROR
    try:
        text = args.config.read_text() if args.config is not None else ""
        overrides = {"seed": args.seed} if args.seed is not None else None
        cfg = parse_config(text, mode=args.mode, overrides=overrides)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_ERROR
    try:
        return run(cfg, args.out)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
