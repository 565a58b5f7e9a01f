"""Fast invariant checks run by ``rpimeasure verify``."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import master, measurement, moments, operators, thermal, trajectories


@dataclass
class CheckResult:
    module: str
    name: str
    passed: bool
    value: float
    tolerance: float
    seconds: float


def random_hermitian(rng, d):
    X = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return 0.5 * (X + X.conj().T)


def random_density(rng, d):
    X = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    r = X @ X.conj().T
    return r / np.trace(r)


def random_model(rng, d):
    return measurement.MeasurementModel(
        A=random_hermitian(rng, d), B=random_hermitian(rng, d), C=random_hermitian(rng, d),
        kappa=rng.uniform(0.1, 2.0), lam=rng.uniform(0.0, 2.0), hbar=rng.uniform(0.5, 2.0))


def _commutator_check():
    ops = operators.make_oscillator_ops(16, 1.3, 0.7)
    c = operators.commutator(ops.Q, ops.P)[:-1, :-1]
    return np.max(np.abs(c - 1j * ops.hbar * np.eye(15))), 1e-12


def _thermal_number_check():
    rho = operators.thermal_state(40, 1.0)
    return abs(operators.expectation(rho, operators.make_oscillator_ops(40).number) - 1.0), 1e-6


def _shift_identity_check():
    rng = np.random.default_rng(11)
    worst = 0.0
    for d in (2, 5, 9, 16):
        m = random_model(rng, d)
        diff = measurement.hamiltonian_shift(m) - measurement.shift_closed_form(m)
        worst = max(worst, np.max(np.abs(diff)))
    return worst, 1e-12


def _equivalence_check():
    rng = np.random.default_rng(12)
    worst = 0.0
    for d in (2, 4, 8, 16):
        for _ in range(5):
            m = random_model(rng, d)
            H = random_hermitian(rng, d)
            rho = random_density(rng, d)
            diff = master.rhs_lindblad(m, H, rho) - master.rhs_double_commutator(m, H, rho)
            worst = max(worst, np.max(np.abs(diff)))
    return worst, 1e-12


def _trace_preservation_check():
    rng = np.random.default_rng(13)
    m = random_model(rng, 6)
    L = master.build_liouvillian(m, random_hermitian(rng, 6))
    return np.max(np.abs(np.eye(6).reshape(-1) @ L.matrix)), 1e-10


def _moment_closure_check():
    ops = operators.make_oscillator_ops(30)
    m = measurement.oscillator_model(ops, 0.1, 0.2)
    rho0 = operators.coherent_state(30, 1.0)
    ser = master.evolve(rho0, m, ops.H, 2.0, 1e-3, output_stride=500)
    p = moments.MomentParams(1.0, 0.2, 0.1, 1.0)
    ms = moments.integrate_moments(moments.moments_from_density(rho0, ops), p, 2.0, 1e-3,
                                   output_stride=500)
    full = np.array([moments.moments_from_density(s, ops).as_array() for s in ser.states])
    return np.max(np.abs(full - ms.values)), 1e-4


def _virial_check():
    p = moments.MomentParams(omega=1.7, lam=0.3, kappa=0.4, hbar=0.0)
    s = moments.steady_moments(p)
    return abs(s.P2 - p.omega**2 * s.Q2), 1e-12


def _kraus_norm_check():
    ops = operators.make_oscillator_ops(6)
    m = measurement.oscillator_model(ops, 0.5, 0.3)
    psi = operators.coherent_vector(6, 0.3, tol=1e-3)
    return abs(trajectories.step_norm_integral(psi, m, ops.H, 0.01) - 1.0), 1e-10


def _kraus_channel_check():
    ops = operators.make_oscillator_ops(6)
    m = measurement.oscillator_model(ops, 0.5, 0.3)
    L = master.build_liouvillian(m, ops.H)
    errs = []
    for dt in (1e-2, 5e-3):
        S = trajectories.averaged_step_superoperator(m, ops.H, dt)
        errs.append(np.max(np.abs(S - scipy.linalg.expm(L.matrix * dt))))
    # quartering when dt halves; report the deviation of the ratio from 4
    return abs(errs[0] / errs[1] - 4.0), 0.5


def _determinism_check():
    ops = operators.make_oscillator_ops(8)
    m = measurement.oscillator_model(ops, 0.3, 0.2)
    psi = operators.coherent_vector(8, 0.5, tol=1e-4)
    r1 = trajectories.run_trajectory(psi, m, ops.H, 0.1, 1e-3, seed=5)
    r2 = trajectories.run_trajectory(psi, m, ops.H, 0.1, 1e-3, seed=5)
    same = np.array_equal(r1.readouts, r2.readouts) and np.array_equal(r1.states, r2.states)
    return 0.0 if same else 1.0, 0.0


def _thermal_roundtrip_check():
    worst = 0.0
    # below T ~ 0.07 hbar omega / kB, lambda - 4 kappa hbar is not representable in double precision
    for T in np.geomspace(0.1, 100.0, 25):
        spec = thermal.ThermalSpec(T, omega=1.0)
        lam = thermal.lambda_from_temperature(0.3, spec)
        worst = max(worst, abs(thermal.temperature_from_lambda(lam, 0.3, 1.0) - T) / T)
    return worst, 1e-10


CHECKS = [
    ("operators", "canonical commutator [Q,P] = i hbar", _commutator_check),
    ("operators", "thermal state <n> = nbar", _thermal_number_check),
    ("measurement", "shift = (lam/4){A,B}", _shift_identity_check),
    ("master", "double-commutator == Lindblad form", _equivalence_check),
    ("master", "trace preservation", _trace_preservation_check),
    ("moments", "master equation reproduces moment ODE", _moment_closure_check),
    ("moments", "classical virial <P^2> = omega^2 <Q^2>", _virial_check),
    ("trajectories", "readout measure normalized", _kraus_norm_check),
    ("trajectories", "averaged step error quarters with dt", _kraus_channel_check),
    ("trajectories", "seeded determinism", _determinism_check),
    ("thermal", "lambda <-> temperature round trip", _thermal_roundtrip_check),
]


def run_checks():
    results = []
    for module, name, fn in CHECKS:
        t0 = time.perf_counter()
        value, tol = fn()
        results.append(CheckResult(module, name, bool(value <= tol), float(value), tol,
                                   time.perf_counter() - t0))
    return results


def format_table(results):
    lines = [f"{'module':<13} {'check':<42} {'value':>11} {'tol':>9}  result"]
    for r in results:
        lines.append(f"{r.module:<13} {r.name:<42} {r.value:>11.3e} {r.tolerance:>9.1e}  "
                     f"{'PASS' if r.passed else 'FAIL'}")
    return "\n".join(lines)
