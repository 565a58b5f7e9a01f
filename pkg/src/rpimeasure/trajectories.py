"""Readout-conditioned (selective) evolution and its ensemble average.

One time step of length ``dt`` with readout ``a`` applies, right to left::

    K_a = U_half  exp(-i lam a B dt / hbar)  exp(-kappa dt (A - a)^2)  U_half

with ``U_half = exp(-i (H + C) dt / (2 hbar))``. The measurement factor
acts before the back-action factor. Readouts are drawn from

    p(a) = sqrt(2 kappa dt / pi) <psi| exp(-2 kappa dt (A - a)^2) |psi>,

a mixture of Gaussians of variance ``1 / (4 kappa dt)`` centred on the
eigenvalues of ``A``, where ``psi`` is the state seen by the measurement
factor (after the first half step). With the prefactor
``(2 kappa dt / pi)**(1/4)`` the family ``K_a`` resolves the identity
exactly, so the plain average of normalized conditioned states
estimates the readout-averaged (non-selective) state.

Random streams: trajectory ``i`` of a run seeded with ``seed`` draws from
``numpy.random.default_rng(SeedSequence(seed, spawn_key=(i,)))``. It
consumes one uniform (pure-state pick for mixed initial states), then
``n_steps`` uniforms (eigenvalue pick), then ``n_steps`` standard normals
(Gaussian readout noise). Results therefore do not depend on batching or
on the number of workers.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NonpositiveParameterError, NormUnderflowError
from .master import _n_steps
from .operators import DensityMatrix, _check_same_dim, as_array

logger = logging.getLogger(__name__)

NORM_UNDERFLOW = 1e-150


def trajectory_rng(seed, index):
    """Independent generator for trajectory ``index`` of a run seeded with ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(index),)))


def _half_unitary(m, H, dt):
    return scipy.linalg.expm(-1j * (as_array(H) + m.C) * dt / (2.0 * m.hbar))


def readout_sigma(m, dt):
    """Standard deviation ``1 / sqrt(4 kappa dt)`` of the readout around an eigenvalue of ``A``."""
    return 1.0 / math.sqrt(4.0 * m.kappa * dt)


def measurement_factor(m, a, dt):
    alpha, V = m.eig_A
    return (V * np.exp(-m.kappa * dt * (alpha - a) ** 2)) @ V.conj().T


def backaction_factor(m, a, dt):
    b, W = m.eig_B
    return (W * np.exp(-1j * m.lam * a * b * dt / m.hbar)) @ W.conj().T


def step_operator(m, H, a, dt, normalized=False):
    """The (unnormalized) conditioned-step operator ``K_a``.

    With ``normalized=True`` it carries the factor ``(2 kappa dt / pi)**(1/4)``
    that makes ``integral K_a^dag K_a da`` equal the identity.
    """
    Uh = _half_unitary(m, H, dt)
    K = Uh @ backaction_factor(m, a, dt) @ measurement_factor(m, a, dt) @ Uh
    if normalized:
        K = K * (2.0 * m.kappa * dt / math.pi) ** 0.25
    return K


def conditional_step(state, m, H, a, dt):
    """Apply ``K_a`` to a state vector (``K psi``) or density matrix (``K rho K^dag``).

    The result is not normalized.
    """
    if not dt > 0:
        raise NonpositiveParameterError(f"dt must be positive, got {dt!r}")
    K = step_operator(m, H, a, dt)
    x = as_array(state)
    if x.ndim == 1:
        return K @ x
    _check_same_dim(x, K)
    return K @ x @ K.conj().T


def _eigen_probabilities(state, m):
    _, V = m.eig_A
    x = as_array(state)
    if x.ndim == 1:
        c = V.conj().T @ x
        p = np.abs(c) ** 2
    else:
        p = np.real(np.einsum("ji,jk,ki->i", V.conj(), x, V))
    p = np.clip(p, 0.0, None)
    return p / p.sum()


def _pick(cum, u):
    """Index ``n`` with ``cum[n-1] <= u * cum[-1] < cum[n]`` along axis 0."""
    idx = (cum < u * cum[-1]).sum(axis=0)
    return np.minimum(idx, cum.shape[0] - 1)


def sample_readout(state, m, dt, rng):
    """Draw a readout for ``state`` as seen by the measurement factor.

    Picks eigenvalue ``alpha_n`` of ``A`` with probability ``|c_n|^2``,
    then returns ``alpha_n + sigma * z`` with ``sigma = 1/sqrt(4 kappa dt)``.
    Consumes one uniform and one standard normal from ``rng``.
    """
    if not dt > 0:
        raise NonpositiveParameterError(f"dt must be positive, got {dt!r}")
    alpha, _ = m.eig_A
    p = _eigen_probabilities(state, m)
    u = rng.random()
    z = rng.standard_normal()
    n = int(_pick(np.cumsum(p), u))
    return float(alpha[n] + readout_sigma(m, dt) * z)


class _BatchKernel:
    """Step machinery for many trajectories at once.

    Between steps a batch is stored in the eigenbasis of ``B`` with the
    closing half step still pending; the pending half step is merged with
    the next opening half step into one full unitary.
    """

    def __init__(self, m, H, dt):
        self.m = m
        self.dt = dt
        self.alpha, VA = m.eig_A
        self.b, VB = m.eig_B
        Uh = _half_unitary(m, H, dt)
        U = Uh @ Uh
        self.std_to_A = VA.conj().T @ Uh
        self.A_to_B = VB.conj().T @ VA
        self.B_to_A = VA.conj().T @ U @ VB
        self.B_to_std = Uh @ VB
        self.sigma = readout_sigma(m, dt)
        self.kdt = m.kappa * dt
        self.phase = m.lam * dt / m.hbar

    def run(self, psi0, u, z, stride, n_steps, on_record):
        """Propagate columns of ``psi0``; ``u``, ``z`` have shape ``(n_steps, n_batch)``."""
        alpha = self.alpha[:, None]
        b = self.b[:, None]
        X = self.std_to_A @ psi0
        n_batch = psi0.shape[1]
        readouts = np.empty((n_steps, n_batch))
        log_w = np.zeros((n_steps + 1, n_batch))
        for k in range(n_steps):
            probs = X.real**2 + X.imag**2
            idx = _pick(np.cumsum(probs, axis=0), u[k])
            a = self.alpha[idx] + self.sigma * z[k]
            readouts[k] = a
            X *= np.exp(-self.kdt * (alpha - a) ** 2)
            Y = self.A_to_B @ X
            Y *= np.exp(-1j * self.phase * (b * a))
            norms = np.sqrt(np.sum(Y.real**2 + Y.imag**2, axis=0))
            if np.any(norms < NORM_UNDERFLOW):
                j = int(np.argmin(norms))
                raise NormUnderflowError(
                    f"conditioned state collapsed at step {k + 1} (norm {norms[j]:.3e}, "
                    f"readout {a[j]:.6g})")
            Y /= norms
            log_w[k + 1] = log_w[k] + np.log(norms)
            if (k + 1) % stride == 0 or k + 1 == n_steps:
                on_record(k + 1, self.B_to_std @ Y)
            X = self.B_to_A @ Y
        return readouts, log_w


def _initial_vectors(rho0, u0):
    """Pure-state picks for each column given uniforms ``u0``."""
    x = as_array(rho0)
    if x.ndim == 1:
        psi = x / np.linalg.norm(x)
        return np.repeat(psi[:, None], len(u0), axis=1)
    w, V = np.linalg.eigh(x)
    w = np.clip(w, 0.0, None)
    idx = _pick(np.cumsum(w)[:, None], np.asarray(u0)[None, :])
    return V[:, idx.ravel()].astype(complex)


def _draws(seed, indices, n_steps):
    u0 = np.empty(len(indices))
    u = np.empty((n_steps, len(indices)))
    z = np.empty((n_steps, len(indices)))
    for j, i in enumerate(indices):
        rng = trajectory_rng(seed, i)
        u0[j] = rng.random()
        u[:, j] = rng.random(n_steps)
        z[:, j] = rng.standard_normal(n_steps)
    return u0, u, z


@dataclass(frozen=True)
class TrajectoryRecord:
    """One realization.

    ``readouts[k]`` is the readout of the step ending at ``step_times[k]``.
    ``states`` holds normalized state vectors at ``times``.
    ``log_weight[k]`` is the accumulated log-norm of the bare step factors
    (without the ``(2 kappa dt/pi)**(1/4)`` prefactor) after ``k`` steps.
    """

    times: np.ndarray
    step_times: np.ndarray
    readouts: np.ndarray
    states: np.ndarray
    log_weight: np.ndarray
    seed: int
    index: int

    def expectation(self, X):
        X = as_array(X)
        return np.real(np.einsum("ti,ij,tj->t", self.states.conj(), X, self.states))

    def density(self, i):
        return DensityMatrix.from_vector(self.states[i])


def run_trajectory(state0, m, H, t_final, dt, seed, *, index=0, output_stride=1):
    """Alternate readout sampling and conditioned steps, renormalizing each step.

    ``state0`` may be a state vector or a density matrix (a pure component
    is sampled from its eigendecomposition). Identical ``(seed, index)``
    give bitwise-identical records, equal to member ``index`` of
    :func:`ensemble_average` with the same seed.
    """
    n = _n_steps(t_final, dt)
    kernel = _BatchKernel(m, H, dt)
    u0, u, z = _draws(seed, [index], n)
    psi0 = _initial_vectors(state0, u0)
    stride = max(int(output_stride), 1)
    times, states = [0.0], [psi0[:, 0].copy()]

    def on_record(k, psi):
        times.append(k * dt)
        states.append(psi[:, 0].copy())

    readouts, log_w = kernel.run(psi0, u, z, stride, n, on_record)
    return TrajectoryRecord(times=np.array(times), step_times=dt * np.arange(1, n + 1),
                            readouts=readouts[:, 0], states=np.array(states),
                            log_weight=log_w[:, 0], seed=int(seed), index=int(index))


@dataclass(frozen=True)
class EnsembleResult:
    times: np.ndarray
    mean_states: list
    n_traj: int
    rng_seed: int

    @property
    def final(self):
        return self.mean_states[-1]


def _pairwise_sum(items):
    if len(items) == 1:
        return items[0]
    mid = len(items) // 2
    return _pairwise_sum(items[:mid]) + _pairwise_sum(items[mid:])


def ensemble_average(state0, m, H, t_final, dt, n_traj, seed, *, output_stride=None,
                     batch_size=256, n_jobs=1):
    """Average normalized conditioned states over ``n_traj`` trajectories.

    Trajectories run in fixed batches of ``batch_size`` (optionally on
    ``n_jobs`` threads); batch partial sums are combined by pairwise
    summation in batch order, so the result is independent of ``n_jobs``.
    By default only the initial and final times are recorded.
    """
    if int(n_traj) < 1:
        raise ValueError(f"n_traj must be >= 1, got {n_traj!r}")
    n_traj = int(n_traj)
    n = _n_steps(t_final, dt)
    stride = n if output_stride is None else max(int(output_stride), 1)
    stride = max(stride, 1)
    kernel = _BatchKernel(m, H, dt)
    record_steps = [k for k in range(1, n + 1) if k % stride == 0 or k == n]
    batches = [list(range(s, min(s + batch_size, n_traj))) for s in range(0, n_traj, batch_size)]

    def run_batch(indices):
        u0, u, z = _draws(seed, indices, n)
        psi0 = _initial_vectors(state0, u0)
        sums = [psi0 @ psi0.conj().T]

        def on_record(k, psi):
            sums.append(psi @ psi.conj().T)

        kernel.run(psi0, u, z, stride, n, on_record)
        return sums

    if n_jobs == 1:
        partial = [run_batch(b) for b in batches]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            partial = list(pool.map(run_batch, batches))

    times = [0.0] + [k * dt for k in record_steps]
    means = []
    for t_i in range(len(times)):
        total = _pairwise_sum([p[t_i] for p in partial])
        means.append(DensityMatrix(total / n_traj, check=False))
    return EnsembleResult(times=np.array(times), mean_states=means, n_traj=n_traj,
                          rng_seed=int(seed))


def readout_grid(m, dt, width=12.0, points_per_sigma=8):
    """Uniform readout grid covering every Gaussian component to ``width`` standard deviations."""
    alpha, _ = m.eig_A
    s = readout_sigma(m, dt)
    lo, hi = alpha[0] - width * s, alpha[-1] + width * s
    n = int(math.ceil((hi - lo) / (s / points_per_sigma))) + 1
    return np.linspace(lo, hi, n)


def averaged_step_superoperator(m, H, dt, grid=None):
    """Row-major superoperator of ``rho -> integral K_a rho K_a^dag da`` by trapezoidal quadrature."""
    if grid is None:
        grid = readout_grid(m, dt)
    d = m.dim
    Uh = _half_unitary(m, H, dt)
    alpha, VA = m.eig_A
    b, VB = m.eig_B
    c2 = math.sqrt(2.0 * m.kappa * dt / math.pi)
    w = np.full(len(grid), grid[1] - grid[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    S = np.zeros((d * d, d * d), dtype=complex)
    left = Uh @ VB
    mid = VB.conj().T @ VA
    right = VA.conj().T @ Uh
    for a, wa in zip(grid, w):
        Mf = np.exp(-m.kappa * dt * (alpha - a) ** 2)
        Bf = np.exp(-1j * m.lam * a * b * dt / m.hbar)
        K = (left * Bf) @ (mid * Mf) @ right
        S += (wa * c2) * np.kron(K, K.conj())
    return S


def step_norm_integral(state, m, H, dt, grid=None):
    """``integral <psi| K_a^dag K_a |psi> da`` for normalized ``K_a``; equals 1."""
    if grid is None:
        grid = readout_grid(m, dt)
    x = as_array(state)
    rho = np.outer(x, x.conj()) if x.ndim == 1 else x
    vals = []
    for a in grid:
        K = step_operator(m, H, a, dt, normalized=True)
        vals.append(np.real(np.trace(K @ rho @ K.conj().T)))
    return float(np.trapezoid(vals, grid))
