"""Dense operators and states on a truncated Fock space.

Operators are plain complex ``numpy`` arrays of shape ``(dim, dim)``.
Density matrices are wrapped in :class:`DensityMatrix`, which symmetrizes
on construction and checks trace, Hermiticity and positivity.

The oscillator has unit mass throughout::

    H = P**2 / 2 + omega**2 * Q**2 / 2
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.special import gammaln

from .errors import (
    DimensionMismatchError,
    InvalidDimensionError,
    InvalidIndexError,
    InvalidStateError,
    NonpositiveParameterError,
    TruncationError,
)

logger = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-9
POSITIVITY_TOL = 1e-8
TRUNCATION_TOL = 1e-8
LEAK_WARN = 1e-6


def hermitize(X, name="operator"):
    """Return ``(X + X^dagger) / 2``, logging the removed anti-Hermitian residual."""
    X = np.asarray(X, dtype=complex)
    residual = float(np.max(np.abs(X - X.conj().T))) if X.size else 0.0
    if residual > 0.0:
        logger.debug("hermitize %s: pre-symmetrization residual %.3e", name, residual)
    return 0.5 * (X + X.conj().T)


def hermiticity_error(X):
    X = np.asarray(X)
    return float(np.max(np.abs(X - X.conj().T)))


def is_hermitian(X, tol=HERMITIAN_TOL):
    return hermiticity_error(X) <= tol


def _check_square(X, name="operator"):
    X = np.asarray(X)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise InvalidDimensionError(f"{name} must be a square matrix, got shape {X.shape}")
    if X.shape[0] < 2:
        raise InvalidDimensionError(f"{name} must have dim >= 2, got {X.shape[0]}")
    return X


def _check_same_dim(*mats):
    dims = {np.shape(m) for m in mats}
    if len(dims) != 1:
        raise DimensionMismatchError(f"operator shapes differ: {sorted(dims)}")


def commutator(X, Y):
    """``XY - YX``."""
    X, Y = as_array(X), as_array(Y)
    _check_same_dim(X, Y)
    return X @ Y - Y @ X


def anticommutator(X, Y):
    """``XY + YX``."""
    X, Y = as_array(X), as_array(Y)
    _check_same_dim(X, Y)
    return X @ Y + Y @ X


def truncation_leak(rho):
    """Population held in the two highest Fock levels."""
    d = np.real(np.diagonal(as_array(rho)))
    return float(np.sum(d[-2:]))


class DensityMatrix:
    """Hermitian, unit-trace, positive-semidefinite state.

    The matrix is symmetrized on construction. With ``check=True`` (the
    default) the invariants are enforced and :class:`InvalidStateError`
    is raised on failure; with ``check=False`` the diagnostics are still
    available for inspection.
    """

    def __init__(self, data, *, check=True, trace_tol=TRACE_TOL,
                 positivity_tol=POSITIVITY_TOL):
        data = _check_square(data, "density matrix")
        self._data = hermitize(data, "density matrix")
        self._data.setflags(write=False)
        self.trace_tol = trace_tol
        self.positivity_tol = positivity_tol
        if check:
            self.validate()

    @property
    def data(self):
        return self._data

    @property
    def dim(self):
        return self._data.shape[0]

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._data
        return self._data.astype(dtype)

    def __repr__(self):
        return (f"DensityMatrix(dim={self.dim}, trace_deviation={self.trace_deviation:.2e}, "
                f"min_eigenvalue={self.min_eigenvalue:.2e})")

    @cached_property
    def trace_deviation(self):
        return abs(complex(np.trace(self._data)) - 1.0)

    @cached_property
    def eigenvalues(self):
        return np.linalg.eigvalsh(self._data)

    @cached_property
    def min_eigenvalue(self):
        return float(self.eigenvalues[0])

    @cached_property
    def leak(self):
        return truncation_leak(self._data)

    @cached_property
    def purity(self):
        return float(np.real(np.vdot(self._data, self._data)))

    def validate(self):
        if self.trace_deviation > self.trace_tol:
            raise InvalidStateError(
                f"|tr(rho) - 1| = {self.trace_deviation:.3e} exceeds {self.trace_tol:.1e}")
        if self.min_eigenvalue < -self.positivity_tol:
            raise InvalidStateError(
                f"min eigenvalue {self.min_eigenvalue:.3e} below -{self.positivity_tol:.1e}")
        return self

    @classmethod
    def from_vector(cls, psi, **kwargs):
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()), **kwargs)


def as_array(X):
    """Underlying complex array of an operator or :class:`DensityMatrix`."""
    if isinstance(X, DensityMatrix):
        return X.data
    return np.asarray(X, dtype=complex)


def expectation(rho, X, *, hermitian=None):
    """``tr(rho X)``.

    If ``hermitian`` is true (or ``None`` and ``X`` is Hermitian to 1e-12)
    the result is checked to be real within 1e-10 and returned as a float.
    """
    r, X = as_array(rho), as_array(X)
    _check_same_dim(r, X)
    value = complex(np.einsum("ij,ji->", r, X))
    if hermitian is None:
        hermitian = is_hermitian(X)
    if hermitian:
        if abs(value.imag) > 1e-10:
            raise InvalidStateError(
                f"expectation of Hermitian operator has imaginary part {value.imag:.3e}")
        return value.real
    return value


@dataclass(frozen=True)
class OscillatorOps:
    """Position, momentum, energy and ladder operators of a unit-mass oscillator."""

    Q: np.ndarray
    P: np.ndarray
    H: np.ndarray
    lower: np.ndarray
    raise_: np.ndarray
    omega: float
    hbar: float
    number: np.ndarray = field(repr=False)

    @property
    def dim(self):
        return self.Q.shape[0]

    @property
    def identity(self):
        return np.eye(self.dim, dtype=complex)


def _positive(name, value):
    if not (value > 0 and math.isfinite(value)):
        raise NonpositiveParameterError(f"{name} must be positive and finite, got {value!r}")
    return float(value)


def make_oscillator_ops(dim, omega=1.0, hbar=1.0):
    """Build truncated oscillator operators.

    Q = sqrt(hbar / 2 omega) (a + a^dag),  P = i sqrt(hbar omega / 2) (a^dag - a),
    and H is assembled from the truncated P and Q, so its top diagonal
    entry is ``hbar*omega*(dim-1)/2`` rather than ``hbar*omega*(dim-1/2)``.
    """
    if int(dim) != dim or dim < 2:
        raise InvalidDimensionError(f"dim must be an integer >= 2, got {dim!r}")
    dim = int(dim)
    omega = _positive("omega", omega)
    hbar = _positive("hbar", hbar)

    a = np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1).astype(complex)
    adag = a.conj().T
    Q = hermitize(math.sqrt(hbar / (2 * omega)) * (a + adag), "Q")
    P = hermitize(1j * math.sqrt(hbar * omega / 2) * (adag - a), "P")
    H = hermitize(0.5 * (P @ P) + 0.5 * omega**2 * (Q @ Q), "H")
    N = np.diag(np.arange(dim, dtype=float)).astype(complex)
    for M in (Q, P, H, a, adag, N):
        M.setflags(write=False)
    return OscillatorOps(Q=Q, P=P, H=H, lower=a, raise_=adag, omega=omega, hbar=hbar, number=N)


def fock_state(dim, n):
    if int(dim) != dim or dim < 2:
        raise InvalidDimensionError(f"dim must be an integer >= 2, got {dim!r}")
    if not (0 <= n < dim) or int(n) != n:
        raise InvalidIndexError(f"Fock index {n!r} outside [0, {dim})")
    rho = np.zeros((int(dim), int(dim)), dtype=complex)
    rho[int(n), int(n)] = 1.0
    return DensityMatrix(rho)


def coherent_vector(dim, alpha, tol=TRUNCATION_TOL):
    """Normalized coherent-state amplitudes; raises if the discarded population exceeds ``tol``."""
    if int(dim) != dim or dim < 2:
        raise InvalidDimensionError(f"dim must be an integer >= 2, got {dim!r}")
    alpha = complex(alpha)
    n = np.arange(int(dim))
    r = abs(alpha)
    if r == 0.0:
        c = np.zeros(int(dim), dtype=complex)
        c[0] = 1.0
        return c
    log_mag = -0.5 * r**2 + n * math.log(r) - 0.5 * gammaln(n + 1)
    c = np.exp(log_mag) * np.exp(1j * n * np.angle(alpha))
    kept = float(np.sum(np.abs(c) ** 2))
    if 1.0 - kept > tol:
        raise TruncationError(
            f"coherent state alpha={alpha} loses {1.0 - kept:.3e} population at dim={dim}")
    return c / math.sqrt(kept)


def coherent_state(dim, alpha, tol=TRUNCATION_TOL):
    return DensityMatrix.from_vector(coherent_vector(dim, alpha, tol))


def thermal_state(dim, nbar, tol=TRUNCATION_TOL):
    """Truncated Bose-Einstein state with weights proportional to (nbar/(1+nbar))**n."""
    if int(dim) != dim or dim < 2:
        raise InvalidDimensionError(f"dim must be an integer >= 2, got {dim!r}")
    if nbar < 0 or not math.isfinite(nbar):
        raise NonpositiveParameterError(f"nbar must be finite and >= 0, got {nbar!r}")
    dim = int(dim)
    ratio = nbar / (1.0 + nbar)
    # exact tail of the untruncated geometric distribution
    lost = ratio**dim
    if lost > tol:
        raise TruncationError(f"thermal state nbar={nbar} loses {lost:.3e} population at dim={dim}")
    w = ratio ** np.arange(dim)
    return DensityMatrix(np.diag(w / w.sum()).astype(complex))


def maximally_mixed(dim):
    return DensityMatrix(np.eye(int(dim), dtype=complex) / dim)
