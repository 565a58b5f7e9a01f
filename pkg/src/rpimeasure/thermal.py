"""Thermal-reservoir relations for the monitored oscillator.

If the oscillator equilibrates with a bath at temperature ``T`` the
disturbance strength is fixed by ``lam = 4 kappa hbar coth(hbar omega / 2 kB T)``,
which forces ``lam > 4 hbar kappa``. Smaller ``lam`` (the quantum regime)
admits no equilibrium temperature.

Diffusion convention: ``d<P^2>/dt`` contains ``2 D``, so the source
``lam^2 omega^2 / (4 kappa)`` corresponds to ``D = lam^2 omega^2 / (8 kappa)``.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass

from .errors import NoEquilibriumError, NonpositiveParameterError

logger = logging.getLogger(__name__)

EXP_OVERFLOW = 700.0
BOUNDARY_RTOL = 1e-12


@dataclass(frozen=True)
class ThermalSpec:
    temperature: float
    omega: float
    hbar: float = 1.0
    kB: float = 1.0

    def __post_init__(self):
        for name in ("temperature", "omega", "hbar", "kB"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise NonpositiveParameterError(f"{name} must be positive, got {v!r}")

    @property
    def x(self):
        """``hbar omega / (kB T)``."""
        return self.hbar * self.omega / (self.kB * self.temperature)


def _coth(x):
    return 1.0 / math.tanh(x)


def nbar(spec):
    """Bose-Einstein occupation; exactly 0 once ``hbar omega / kB T`` exceeds 700."""
    x = spec.x
    if x > EXP_OVERFLOW:
        logger.debug("nbar underflows to 0 (hbar omega / kB T = %.3g)", x)
        return 0.0
    return 1.0 / math.expm1(x)


def thermal_energy(spec):
    """``hbar omega (nbar + 1/2) = (hbar omega / 2) coth(hbar omega / 2 kB T)``."""
    return 0.5 * spec.hbar * spec.omega * _coth(0.5 * spec.x)


def diffusion_coefficient(gamma, spec):
    if gamma < 0:
        raise NonpositiveParameterError(f"gamma must be >= 0, got {gamma!r}")
    return 0.5 * gamma * spec.hbar * spec.omega * _coth(0.5 * spec.x)


def lambda_from_temperature(kappa, spec):
    if not kappa > 0:
        raise NonpositiveParameterError(f"kappa must be positive, got {kappa!r}")
    return 4.0 * kappa * spec.hbar * _coth(0.5 * spec.x)


def temperature_from_lambda(lam, kappa, omega, hbar=1.0, kB=1.0):
    if not kappa > 0:
        raise NonpositiveParameterError(f"kappa must be positive, got {kappa!r}")
    y = lam / (4.0 * kappa * hbar)
    if y <= 1.0:
        raise NoEquilibriumError(
            f"lambda={lam} <= 4 hbar kappa={4 * kappa * hbar}: no equilibrium temperature")
    # arccoth(y) = atanh(1/y)
    return (hbar * omega / (2.0 * kB)) / math.atanh(1.0 / y)


class Regime(enum.Enum):
    CLASSICAL = "classical"
    QUANTUM = "quantum"
    BOUNDARY = "boundary"


def regime_classify(lam, kappa, hbar):
    if not kappa > 0:
        raise NonpositiveParameterError(f"kappa must be positive, got {kappa!r}")
    if not hbar > 0:
        raise NonpositiveParameterError(f"hbar must be positive, got {hbar!r}")
    threshold = 4.0 * hbar * kappa
    if abs(lam - threshold) <= BOUNDARY_RTOL * threshold:
        return Regime.BOUNDARY
    return Regime.CLASSICAL if lam > threshold else Regime.QUANTUM
