"""Master equation induced by averaging over measurement readouts.

Two equivalent right-hand sides are provided:

* :func:`rhs_double_commutator` -- the nested-commutator form
  ``-(i/hbar)[H+C, rho] - (kappa/2)[A,[A,rho]] - (lam^2/(8 kappa hbar^2))[B,[B,rho]]
  - (i lam/(2 hbar))[B, {A, rho}]``;
* :func:`rhs_lindblad` -- the Lindblad form with jump operator ``l`` and
  the shifted Hamiltonian.

The Lindblad dissipator is written in the canonical ordering
``-(kappa/2)(l^dag l rho - 2 l rho l^dag + rho l^dag l)``. Writing the last
term as ``rho l l^dag`` instead is not trace preserving and does not match
the nested-commutator form (it differs by ``i kappa c rho [A, B]`` with
``c = lam/(2 kappa hbar)``); ``tests/test_master.py`` pins this.

Vectorization is row-major: ``vec(rho) = rho.reshape(-1)``, so that
``vec(X rho Y) = kron(X, Y.T) @ vec(rho)``.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (
    ConvergenceError,
    DegenerateKernelError,
    DimensionCapError,
    PositivityError,
    PositivityWarning,
    StepSizeError,
    TruncationWarning,
)
from .measurement import effective_hamiltonian, lindblad_operator
from .operators import (
    LEAK_WARN,
    DensityMatrix,
    _check_same_dim,
    anticommutator,
    as_array,
    commutator,
    hermiticity_error,
    truncation_leak,
)

logger = logging.getLogger(__name__)

LIOUVILLIAN_CAP = 4096


def rhs_double_commutator(m, H, rho):
    r = as_array(rho)
    H = as_array(H)
    _check_same_dim(r, H, m.A)
    A, B, hbar = m.A, m.B, m.hbar
    out = -1j / hbar * commutator(H + m.C, r)
    out -= 0.5 * m.kappa * commutator(A, commutator(A, r))
    if m.lam:
        out -= m.lam**2 / (8 * m.kappa * hbar**2) * commutator(B, commutator(B, r))
        out -= 1j * m.lam / (2 * hbar) * commutator(B, anticommutator(A, r))
    return out


def rhs_lindblad(m, H, rho):
    r = as_array(rho)
    H = as_array(H)
    _check_same_dim(r, H, m.A)
    H_eff = effective_hamiltonian(m, H).op
    l = lindblad_operator(m)
    ld = l.conj().T
    ldl = ld @ l
    return (-1j / m.hbar * commutator(H_eff, r)
            - 0.5 * m.kappa * (ldl @ r - 2 * l @ r @ ld + r @ ldl))


class _Generator:
    """Precomputed Lindblad generator: ``rhs(rho) = G rho + rho G^dag + kappa l rho l^dag``."""

    def __init__(self, m, H):
        H = as_array(H)
        _check_same_dim(H, m.A)
        self.H_eff = effective_hamiltonian(m, H).op
        self.l = lindblad_operator(m)
        self.ld = self.l.conj().T
        self.G = -1j / m.hbar * self.H_eff - 0.5 * m.kappa * (self.ld @ self.l)
        self.kappa = m.kappa
        self.hbar = m.hbar

    def __call__(self, rho):
        # valid for Hermitian rho only: rho G^dag = (G rho)^dag
        Gr = self.G @ rho
        return Gr + Gr.conj().T + self.kappa * (self.l @ rho @ self.ld)

    def rate_scale(self):
        """Upper estimate of the generator's spectral radius."""
        ev = np.linalg.eigvalsh(self.H_eff)
        spread = (ev[-1] - ev[0]) / self.hbar
        return spread + 2 * self.kappa * np.linalg.norm(self.l, 2) ** 2


@dataclass(frozen=True)
class Liouvillian:
    """Superoperator of the Lindblad generator (row-major vectorization)."""

    model: object
    H: np.ndarray
    matrix: np.ndarray = field(repr=False)

    @property
    def dim(self):
        return self.H.shape[0]

    def apply(self, rho):
        r = as_array(rho)
        return (self.matrix @ r.reshape(-1)).reshape(r.shape)


def vec(rho):
    return as_array(rho).reshape(-1)


def unvec(v, dim):
    return np.asarray(v).reshape(dim, dim)


def build_liouvillian(m, H, cap=LIOUVILLIAN_CAP):
    H = as_array(H)
    _check_same_dim(H, m.A)
    d = H.shape[0]
    if d * d > cap:
        raise DimensionCapError(f"Liouvillian size {d * d} exceeds cap {cap} (dim {d})")
    H_eff = effective_hamiltonian(m, H).op
    l = lindblad_operator(m)
    ld = l.conj().T
    ldl = ld @ l
    I = np.eye(d)
    L = -1j / m.hbar * (np.kron(H_eff, I) - np.kron(I, H_eff.T))
    L += m.kappa * np.kron(l, ld.T)
    L -= 0.5 * m.kappa * (np.kron(ldl, I) + np.kron(I, ldl.T))
    return Liouvillian(model=m, H=H, matrix=L)


def suggested_dt(m, omega):
    """Documented heuristic ``0.01 / max(omega, kappa ||A||^2, gamma)`` with ``gamma = lam*omega``."""
    normA = np.linalg.norm(m.A, 2)
    return 0.01 / max(omega, m.kappa * normA**2, m.lam * omega)


@dataclass
class EvolutionSeries:
    """States at the output times plus per-output diagnostics.

    ``max_trace_drift`` is tracked over every integration step; eigenvalue,
    Hermiticity and leak diagnostics are taken at the output points.
    """

    times: np.ndarray
    states: list
    trace_drift: np.ndarray
    min_eig: np.ndarray
    hermiticity: np.ndarray
    leak: np.ndarray
    max_trace_drift: float
    flags: list = field(default_factory=list)

    @property
    def flagged(self):
        return bool(self.flags)

    @property
    def final(self):
        return self.states[-1]

    def expectation(self, X):
        X = as_array(X)
        return np.array([np.real(np.einsum("ij,ji->", s.data, X)) for s in self.states])


def _n_steps(t_final, dt):
    if not dt > 0:
        raise StepSizeError(f"dt must be positive, got {dt!r}")
    if t_final < 0:
        raise ValueError(f"t_final must be >= 0, got {t_final!r}")
    n = int(round(t_final / dt))
    if not math.isclose(n * dt, t_final, rel_tol=1e-9, abs_tol=1e-12):
        raise StepSizeError(f"t_final={t_final} is not an integer multiple of dt={dt}")
    return n


def evolve(rho0, m, H, t_final, dt, *, output_stride=1, positivity_policy="flag",
           positivity_tol=1e-6, trace_tol=1e-8, leak_tol=LEAK_WARN, stability_limit=1.0):
    """Integrate the master equation with fixed-step classical RK4.

    ``rho`` is re-symmetrized after every step. Runs are rejected with
    :class:`StepSizeError` when ``dt`` times the generator's spectral-radius
    estimate exceeds ``stability_limit``. Positivity violations below
    ``-positivity_tol`` flag the series (``positivity_policy="flag"``) or
    raise :class:`PositivityError` (``"raise"``).
    """
    if positivity_policy not in ("flag", "raise"):
        raise ValueError(f"unknown positivity_policy {positivity_policy!r}")
    n = _n_steps(t_final, dt)
    gen = _Generator(m, H)
    r = as_array(rho0).copy()
    _check_same_dim(r, gen.G)
    scale = gen.rate_scale()
    if dt * scale > stability_limit:
        raise StepSizeError(
            f"dt={dt} too large: dt * spectral scale = {dt * scale:.3g} > {stability_limit}")
    logger.debug("evolve: dim=%d steps=%d dt*scale=%.3g", r.shape[0], n, dt * scale)

    stride = max(int(output_stride), 1)
    times, states = [], []
    drift, mins, herm, leaks = [], [], [], []
    flags = []
    max_drift = 0.0

    def record(k, r):
        s = DensityMatrix(r, check=False)
        times.append(k * dt)
        states.append(s)
        drift.append(s.trace_deviation)
        mins.append(s.min_eigenvalue)
        herm.append(hermiticity_error(r))
        leaks.append(s.leak)
        if s.min_eigenvalue < -positivity_tol:
            msg = f"min eigenvalue {s.min_eigenvalue:.3e} at t={k * dt:.6g}"
            if positivity_policy == "raise":
                raise PositivityError(msg)
            flags.append(msg)

    record(0, r)
    h = dt
    for k in range(1, n + 1):
        k1 = gen(r)
        k2 = gen(r + 0.5 * h * k1)
        k3 = gen(r + 0.5 * h * k2)
        k4 = gen(r + h * k3)
        raw = r + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        r = 0.5 * (raw + raw.conj().T)
        d = abs(np.trace(r) - 1.0)
        if d > max_drift:
            max_drift = d
        if k % stride == 0 or k == n:
            record(k, raw)

    if max_drift > trace_tol:
        flags.append(f"trace drift {max_drift:.3e} exceeds {trace_tol:.1e}")
    max_leak = max(leaks)
    if max_leak > leak_tol:
        flags.append(f"truncation leak {max_leak:.3e} exceeds {leak_tol:.1e}")
        warnings.warn(f"truncation leak {max_leak:.3e} above {leak_tol:.1e}; increase dim",
                      TruncationWarning, stacklevel=2)
    if flags and positivity_policy == "flag" and any("eigenvalue" in f for f in flags):
        warnings.warn(flags[0], PositivityWarning, stacklevel=2)
    return EvolutionSeries(times=np.array(times), states=states, trace_drift=np.array(drift),
                           min_eig=np.array(mins), hermiticity=np.array(herm),
                           leak=np.array(leaks), max_trace_drift=float(max_drift), flags=flags)


class SteadyState(DensityMatrix):
    """Steady state with kernel diagnostics attached."""

    def __init__(self, data, *, residual, singular_values, leak_tol=LEAK_WARN, **kwargs):
        super().__init__(data, check=False, **kwargs)
        self.residual = residual
        self.singular_values = singular_values
        self.flags = []
        if self.min_eigenvalue < -self.positivity_tol:
            self.flags.append(f"min eigenvalue {self.min_eigenvalue:.3e}")
        if self.leak > leak_tol:
            self.flags.append(f"truncation leak {self.leak:.3e} exceeds {leak_tol:.1e}")

    @property
    def flagged(self):
        return bool(self.flags)


def steady_state(m, H, *, cap=LIOUVILLIAN_CAP, degeneracy_tol=1e-8, residual_tol=1e-10,
                 leak_tol=LEAK_WARN):
    """Kernel of the Liouvillian from its smallest right singular vector.

    Raises :class:`DegenerateKernelError` when the second-smallest
    singular value is also below ``degeneracy_tol`` (relative to the
    largest). A steady state whose top Fock levels hold more than
    ``leak_tol`` population is returned flagged, with a
    :class:`TruncationWarning`.
    """
    L = build_liouvillian(m, H, cap=cap)
    d = L.dim
    _, s, vh = scipy.linalg.svd(L.matrix, lapack_driver="gesdd")
    if s[-2] <= degeneracy_tol * s[0]:
        raise DegenerateKernelError(
            f"Liouvillian kernel is degenerate: smallest singular values {s[-1]:.3e}, {s[-2]:.3e}")
    v = vh[-1].conj()
    rho = unvec(v, d)
    tr = np.trace(rho)
    if abs(tr) < 1e-14:
        raise ConvergenceError("null vector has vanishing trace")
    rho = rho / tr
    rho = 0.5 * (rho + rho.conj().T)
    residual = float(np.linalg.norm(L.matrix @ rho.reshape(-1)))
    if residual > residual_tol:
        raise ConvergenceError(f"steady-state residual {residual:.3e} exceeds {residual_tol:.1e}")
    ss = SteadyState(rho, residual=residual, singular_values=s[-2:], leak_tol=leak_tol,
                     positivity_tol=1e-8)
    if ss.flagged:
        warnings.warn(ss.flags[0], TruncationWarning, stacklevel=2)
    return ss
