"""First and second moments of the monitored oscillator.

For ``A = P``, ``B = omega Q`` the moment hierarchy closes at second
order. With friction ``gamma = lam * omega``::

    d<P>/dt    = -omega^2 <Q> - gamma <P>
    d<Q>/dt    = <P>
    d<P^2>/dt  = -omega^2 <PQ+QP> - 2 gamma <P^2> + lam^2 omega^2 / (4 kappa)
    d<PQ+QP>/dt = -gamma <PQ+QP> + 2 (<P^2> - omega^2 <Q^2>)
    d<Q^2>/dt  = <PQ+QP> + kappa hbar^2

``hbar = 0`` is admitted here (but not in the operator modules) so the
classical limit can be expressed literally.
"""

from __future__ import annotations

import math
from dataclasses import astuple, dataclass

import numpy as np

from .errors import ImaginaryExpectationError, NoDampingError, NonpositiveParameterError
from .master import _n_steps
from .operators import _check_same_dim, as_array

FIELDS = ("meanP", "meanQ", "P2", "PQ", "Q2")


@dataclass(frozen=True)
class MomentState:
    """``<P>, <Q>, <P^2>, <PQ+QP>, <Q^2>``. ``PQ`` is the symmetrized product."""

    meanP: float = 0.0
    meanQ: float = 0.0
    P2: float = 0.0
    PQ: float = 0.0
    Q2: float = 0.0

    def as_array(self):
        return np.array(astuple(self), dtype=float)

    @classmethod
    def from_array(cls, y):
        return cls(*(float(v) for v in y))

    @property
    def var_P(self):
        return self.P2 - self.meanP**2

    @property
    def var_Q(self):
        return self.Q2 - self.meanQ**2

    @property
    def covariance(self):
        return 0.5 * self.PQ - self.meanP * self.meanQ

    @property
    def uncertainty_product(self):
        """``var(P) var(Q) - cov(P,Q)^2``; at least ``hbar^2/4`` for physical states."""
        return self.var_P * self.var_Q - self.covariance**2


@dataclass(frozen=True)
class MomentParams:
    omega: float
    lam: float
    kappa: float
    hbar: float = 1.0

    def __post_init__(self):
        if not self.omega > 0:
            raise NonpositiveParameterError(f"omega must be positive, got {self.omega!r}")
        if not self.lam >= 0:
            raise NonpositiveParameterError(f"lambda must be >= 0, got {self.lam!r}")
        if not self.kappa > 0:
            raise NonpositiveParameterError(f"kappa must be positive, got {self.kappa!r}")
        if not self.hbar >= 0:
            raise NonpositiveParameterError(f"hbar must be >= 0, got {self.hbar!r}")

    @property
    def gamma(self):
        return self.lam * self.omega

    @property
    def momentum_diffusion(self):
        """Constant source ``lam^2 omega^2 / (4 kappa)`` in ``d<P^2>/dt``."""
        return self.lam**2 * self.omega**2 / (4.0 * self.kappa)


def first_moment_rhs(s, p):
    dP = -p.omega**2 * s.meanQ - p.gamma * s.meanP
    dQ = s.meanP
    return dP, dQ


def second_moment_rhs(s, p):
    w2 = p.omega**2
    dP2 = -w2 * s.PQ - 2 * p.gamma * s.P2 + p.momentum_diffusion
    dPQ = -p.gamma * s.PQ + 2 * (s.P2 - w2 * s.Q2)
    dQ2 = s.PQ + p.kappa * p.hbar**2
    return dP2, dPQ, dQ2


def moment_rhs(s, p):
    return MomentState(*first_moment_rhs(s, p), *second_moment_rhs(s, p))


def _affine_form(p):
    """``M, c`` with ``dy/dt = M y + c`` for ``y = (meanP, meanQ, P2, PQ, Q2)``."""
    M = np.zeros((5, 5))
    c = np.zeros(5)
    basis = np.eye(5)
    c[:] = moment_rhs(MomentState(), p).as_array()
    for j in range(5):
        M[:, j] = moment_rhs(MomentState.from_array(basis[j]), p).as_array() - c
    return M, c


@dataclass(frozen=True)
class MomentSeries:
    times: np.ndarray
    values: np.ndarray  # shape (n_times, 5), columns in FIELDS order

    def __len__(self):
        return len(self.times)

    def __getitem__(self, i):
        return MomentState.from_array(self.values[i])

    def column(self, name):
        return self.values[:, FIELDS.index(name)]

    @property
    def final(self):
        return self[-1]


def integrate_moments(s0, p, t_final, dt, output_stride=1):
    """Classical RK4 on the five moment equations.

    The system is linear, so one RK4 step is the fixed affine map
    ``y -> R y + r``; it is precomputed once and iterated.
    """
    n = _n_steps(t_final, dt)
    M, c = _affine_form(p)
    h = dt
    hM = h * M
    I = np.eye(5)
    hM2 = hM @ hM
    hM3 = hM2 @ hM
    R = I + hM + hM2 / 2 + hM3 / 6 + hM3 @ hM / 24
    r = h * (I + hM / 2 + hM2 / 6 + hM3 / 24) @ c

    stride = max(int(output_stride), 1)
    y = s0.as_array()
    times, out = [0.0], [y]
    for k in range(1, n + 1):
        y = R @ y + r
        if k % stride == 0 or k == n:
            times.append(k * dt)
            out.append(y)
    return MomentSeries(times=np.array(times), values=np.array(out))


def steady_moments(p):
    """Fixed point of the moment equations (means vanish).

    ``<PQ+QP> = -kappa hbar^2``,
    ``<P^2> = lam omega / (8 kappa) + omega kappa hbar^2 / (2 lam)``,
    ``omega^2 <Q^2> = <P^2> + lam omega kappa hbar^2 / 2``.
    """
    if p.lam == 0:
        raise NoDampingError("no steady state without friction (lambda = 0)")
    w, lam, k, hb2 = p.omega, p.lam, p.kappa, p.hbar**2
    PQ = -k * hb2
    P2 = lam * w / (8 * k) + w * k * hb2 / (2 * lam)
    Q2 = (P2 + lam * w * k * hb2 / 2) / w**2
    return MomentState(0.0, 0.0, P2, PQ, Q2)


def mean_energy(s, omega):
    return 0.5 * (s.P2 + omega**2 * s.Q2)


def diffusion_negligible_horizon(p):
    """Time ``lam / (8 kappa^2 omega hbar^2)`` below which position diffusion is negligible.

    Returns ``math.inf`` when ``hbar == 0``.
    """
    if p.hbar == 0:
        return math.inf
    if p.lam == 0:
        raise NoDampingError("horizon undefined without friction (lambda = 0)")
    return p.lam / (8 * p.kappa**2 * p.omega * p.hbar**2)


def moments_from_density(rho, ops, imag_tol=1e-9):
    r = as_array(rho)
    _check_same_dim(r, ops.P)
    P, Q = ops.P, ops.Q
    PQ = P @ Q + Q @ P
    vals = []
    for X in (P, Q, P @ P, PQ, Q @ Q):
        v = complex(np.einsum("ij,ji->", r, X))
        if abs(v.imag) > imag_tol:
            raise ImaginaryExpectationError(f"imaginary part {v.imag:.3e} exceeds {imag_tol:.0e}")
        vals.append(v.real)
    return MomentState(*vals)


def moment_operators(ops):
    """The five operators whose expectations make up a :class:`MomentState`."""
    P, Q = ops.P, ops.Q
    return (P, Q, P @ P, P @ Q + Q @ P, Q @ Q)
