"""Non-minimally disturbing continuous measurement of an observable.

A measurement of ``A`` with back-action observable ``B`` weights each
readout history ``a(t)`` by::

    exp( integral dt [ -kappa (A - a)^2 - (i/hbar) (lam * a * B + C) ] )

Averaging over readouts produces a Lindblad generator with the single
jump operator ``l = A - i lam/(2 kappa hbar) B`` and a Hamiltonian
renormalized by ``(lam/4)(AB + BA)``.

Dimensional contract (caller's responsibility): ``kappa * [A]**2 * time``
and ``lam * [A] * [B] * time / hbar`` must both be dimensionless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import NonpositiveParameterError, OverdampedError
from .operators import (
    HERMITIAN_TOL,
    _check_same_dim,
    _check_square,
    anticommutator,
    as_array,
    hermiticity_error,
    hermitize,
)


@dataclass(frozen=True)
class MeasurementModel:
    """Monitored observable ``A``, back-action ``B``, phase generator ``C`` and strengths.

    ``C`` defaults to the zero operator. ``lam`` is the non-minimal
    disturbance strength (the symbol lambda); only ``lam >= 0`` is accepted.
    """

    A: np.ndarray
    B: np.ndarray
    kappa: float
    lam: float = 0.0
    hbar: float = 1.0
    C: np.ndarray | None = field(default=None)

    def __post_init__(self):
        A = _check_square(as_array(self.A), "A")
        B = as_array(self.B)
        C = np.zeros_like(A) if self.C is None else as_array(self.C)
        _check_same_dim(A, B, C)
        for name, X in (("A", A), ("B", B), ("C", C)):
            err = hermiticity_error(X)
            if err > HERMITIAN_TOL:
                raise ValueError(f"{name} is not Hermitian (residual {err:.3e})")
        if not (self.kappa > 0 and math.isfinite(self.kappa)):
            raise NonpositiveParameterError(f"kappa must be positive, got {self.kappa!r}")
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise NonpositiveParameterError(f"lambda must be >= 0, got {self.lam!r}")
        if not (self.hbar > 0 and math.isfinite(self.hbar)):
            raise NonpositiveParameterError(f"hbar must be positive, got {self.hbar!r}")
        object.__setattr__(self, "A", hermitize(A, "A"))
        object.__setattr__(self, "B", hermitize(B, "B"))
        object.__setattr__(self, "C", hermitize(C, "C"))
        object.__setattr__(self, "kappa", float(self.kappa))
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "hbar", float(self.hbar))

    @property
    def dim(self):
        return self.A.shape[0]

    @cached_property
    def eig_A(self):
        """Eigenvalues and eigenvectors of ``A`` (cached)."""
        return np.linalg.eigh(self.A)

    @cached_property
    def eig_B(self):
        return np.linalg.eigh(self.B)

    @property
    def backaction_ratio(self):
        """``lam / (2 kappa hbar)``, the weight of ``B`` inside the jump operator."""
        return self.lam / (2.0 * self.kappa * self.hbar)


def oscillator_model(ops, kappa, lam):
    """Monitor momentum with position as back-action: ``A = P``, ``B = omega Q``, ``C = 0``."""
    return MeasurementModel(A=ops.P, B=ops.omega * ops.Q, kappa=kappa, lam=lam, hbar=ops.hbar)


def lindblad_operator(m):
    return m.A - 1j * m.backaction_ratio * m.B


def hamiltonian_shift(m):
    """Measurement-induced energy shift ``-i (kappa hbar / 4)(l^dag^2 - l^2)``.

    Algebraically this is ``(lam/4)(AB + BA)``; for the oscillator model it
    is ``(lam omega / 4)(PQ + QP)``.
    """
    l = lindblad_operator(m)
    ld = l.conj().T
    return -1j * (m.kappa * m.hbar / 4.0) * (ld @ ld - l @ l)


@dataclass(frozen=True)
class EffectiveHamiltonian:
    op: np.ndarray
    shift: np.ndarray


def effective_hamiltonian(m, H):
    """``H + C + shift``, the Hamiltonian seen by the Lindblad form of the generator."""
    H = as_array(H)
    _check_same_dim(H, m.A)
    shift = hermitize(hamiltonian_shift(m), "hamiltonian shift")
    return EffectiveHamiltonian(op=hermitize(H + m.C + shift, "H_eff"), shift=shift)


def shift_closed_form(m):
    """``(lam/4)(AB + BA)``; independent route to :func:`hamiltonian_shift`."""
    return 0.25 * m.lam * anticommutator(m.A, m.B)


def effective_oscillator_frequency(omega, lam):
    """Frequency ``omega * sqrt(1 - lam**2 / 4)`` of the damped oscillator (friction ``lam*omega``)."""
    if not omega > 0:
        raise NonpositiveParameterError(f"omega must be positive, got {omega!r}")
    if lam < 0:
        raise NonpositiveParameterError(f"lambda must be >= 0, got {lam!r}")
    if lam >= 2:
        raise OverdampedError(f"lambda={lam} >= 2 is not underdamped; shifted frequency is imaginary")
    return omega * math.sqrt(1.0 - lam**2 / 4.0)
