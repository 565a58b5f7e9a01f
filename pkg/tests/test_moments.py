import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from rpimeasure.errors import ImaginaryExpectationError, NoDampingError, NonpositiveParameterError
from rpimeasure.measurement import effective_oscillator_frequency
from rpimeasure.moments import (
    MomentParams,
    MomentState,
    diffusion_negligible_horizon,
    first_moment_rhs,
    integrate_moments,
    mean_energy,
    moment_rhs,
    moments_from_density,
    second_moment_rhs,
    steady_moments,
)
from rpimeasure.operators import coherent_state, fock_state, make_oscillator_ops, maximally_mixed


def hand_system(p):
    """Independently written ``dy/dt = M y + c`` for ``y = (P, Q, P2, PQ, Q2)``."""
    w2, g = p.omega**2, p.lam * p.omega
    M = np.array([
        [-g, -w2, 0, 0, 0],
        [1, 0, 0, 0, 0],
        [0, 0, -2 * g, -w2, 0],
        [0, 0, 2, -g, -2 * w2],
        [0, 0, 0, 1, 0],
    ], dtype=float)
    c = np.array([0, 0, p.lam**2 * p.omega**2 / (4 * p.kappa), 0, p.kappa * p.hbar**2])
    return M, c


def exact_solution(y0, p, t):
    M, c = hand_system(p)
    # augmented generator carries the constant source
    G = np.zeros((6, 6))
    G[:5, :5] = M
    G[:5, 5] = c
    return (scipy.linalg.expm(G * t) @ np.append(y0, 1.0))[:5]


def test_first_moment_examples():
    assert first_moment_rhs(MomentState(), MomentParams(1.0, 0.3, 1.0)) == (0, 0)
    assert first_moment_rhs(MomentState(meanQ=1.0), MomentParams(2.0, 0.0, 1.0)) == (-4.0, 0.0)
    assert first_moment_rhs(MomentState(meanP=2.0), MomentParams(1.0, 0.5, 1.0)) == (-1.0, 2.0)


def test_second_moment_examples():
    p = MomentParams(1.3, 0.4, 0.7, hbar=0.0)
    assert second_moment_rhs(MomentState(), p) == pytest.approx((0.4**2 * 1.3**2 / 2.8, 0, 0))
    dQ2 = second_moment_rhs(MomentState(), MomentParams(1.0, 0.2, 0.3, hbar=1.0))[2]
    assert dQ2 == pytest.approx(0.3, abs=1e-15)
    s = steady_moments(p)
    np.testing.assert_allclose(second_moment_rhs(s, p), 0.0, atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=5, max_size=5),
       st.floats(0.2, 3), st.floats(0, 1.9), st.floats(0.05, 2), st.floats(0, 2))
def test_rhs_matches_hand_system(y, omega, lam, kappa, hbar):
    p = MomentParams(omega, lam, kappa, hbar)
    M, c = hand_system(p)
    got = moment_rhs(MomentState.from_array(np.array(y)), p).as_array()
    np.testing.assert_allclose(got, M @ np.array(y) + c, atol=1e-12)


def test_params_validation():
    with pytest.raises(NonpositiveParameterError):
        MomentParams(0.0, 0.1, 1.0)
    with pytest.raises(NonpositiveParameterError):
        MomentParams(1.0, -0.1, 1.0)
    with pytest.raises(NonpositiveParameterError):
        MomentParams(1.0, 0.1, 0.0)
    with pytest.raises(NonpositiveParameterError):
        MomentParams(1.0, 0.1, 1.0, hbar=-1.0)
    p = MomentParams(2.0, 0.5, 1.0)
    assert p.gamma == 1.0


def test_integrate_matches_matrix_exponential():
    p = MomentParams(1.1, 0.3, 0.4, 0.8)
    y0 = np.array([0.3, -1.0, 1.2, 0.1, 2.0])
    ser = integrate_moments(MomentState.from_array(y0), p, 5.0, 1e-3, output_stride=1000)
    for t, y in zip(ser.times, ser.values):
        np.testing.assert_allclose(y, exact_solution(y0, p, t), atol=1e-10)


def test_first_moments_follow_damped_oscillator():
    omega, lam = 1.0, 0.3
    p = MomentParams(omega, lam, 0.2, 1.0)
    g = lam * omega
    Om = effective_oscillator_frequency(omega, lam)
    P0, Q0 = 0.4, 1.0
    t_final = 10 * 2 * math.pi / Om
    dt = t_final / 20000
    ser = integrate_moments(MomentState(P0, Q0, 1.0, 0.0, 1.0), p, t_final, dt, output_stride=100)
    t = ser.times
    q = np.exp(-g * t / 2) * (Q0 * np.cos(Om * t) + (P0 + g * Q0 / 2) / Om * np.sin(Om * t))
    np.testing.assert_allclose(ser.column("meanQ"), q, atol=1e-8)


def test_long_time_limit_is_steady_state():
    p = MomentParams(1.0, 0.2, 0.1, 1.0)
    t_final = 50 / (p.lam * p.omega)
    ser = integrate_moments(MomentState(0.0, 1.4, 0.5, 0.0, 2.5), p, t_final, 1e-2,
                            output_stride=25000)
    np.testing.assert_allclose(ser.final.as_array(), steady_moments(p).as_array(), atol=1e-8)


def test_small_time_momentum_diffusion_slope():
    # hbar = 0 leaves only the momentum diffusion source at t = 0
    p = MomentParams(1.0, 0.3, 0.5, hbar=0.0)
    h = 1e-6
    ser = integrate_moments(MomentState(), p, h, h)
    slope = ser.final.P2 / h
    assert slope == pytest.approx(p.lam**2 * p.omega**2 / (4 * p.kappa), abs=1e-6)
    assert ser.final.Q2 == pytest.approx(0.0, abs=1e-15)


def test_integrate_step_rejection():
    from rpimeasure.errors import StepSizeError
    with pytest.raises(StepSizeError):
        integrate_moments(MomentState(), MomentParams(1.0, 0.1, 1.0), 1.0, 0.0)
    with pytest.raises(StepSizeError):
        integrate_moments(MomentState(), MomentParams(1.0, 0.1, 1.0), 1.0, 0.3)


def test_classical_steady_state_and_virial():
    p = MomentParams(1.0, 0.1, 1.0, hbar=0.0)
    s = steady_moments(p)
    assert s.P2 == pytest.approx(0.0125, abs=1e-15)
    assert s.P2 == s.Q2
    assert s.PQ == 0.0
    assert mean_energy(s, 1.0) == pytest.approx(p.lam * p.omega / (8 * p.kappa), abs=1e-15)


@pytest.mark.parametrize("omega,lam,kappa,hbar", [(1.0, 0.1, 1.0, 1.0), (2.3, 0.7, 0.2, 0.6),
                                                  (0.5, 1.5, 3.0, 1.0)])
def test_steady_state_matches_linear_solve(omega, lam, kappa, hbar):
    p = MomentParams(omega, lam, kappa, hbar)
    M, c = hand_system(p)
    y = np.linalg.solve(M, -c)
    assert np.max(np.abs(steady_moments(p).as_array() - y)) < 1e-12


def test_steady_state_requires_damping():
    with pytest.raises(NoDampingError):
        steady_moments(MomentParams(1.0, 0.0, 1.0))


def test_mean_energy_examples():
    assert mean_energy(MomentState(), 3.0) == 0.0
    assert mean_energy(MomentState(P2=1.0, Q2=1.0), 2.0) == 2.5


def test_horizon():
    p = MomentParams(1.0, 0.1, 1.0, 1.0)
    t_star = diffusion_negligible_horizon(p)
    assert t_star == pytest.approx(0.0125, abs=1e-15)
    assert diffusion_negligible_horizon(MomentParams(1.0, 0.1, 1.0, 0.0)) == math.inf
    classical_Q2 = p.lam * p.omega / (8 * p.kappa * p.omega**2)
    assert p.kappa * p.hbar**2 * 0.01 * t_star / classical_Q2 == pytest.approx(0.01)
    with pytest.raises(NoDampingError):
        diffusion_negligible_horizon(MomentParams(1.0, 0.0, 1.0, 1.0))


def test_moments_from_density_examples():
    ops = make_oscillator_ops(40, 1.0, 1.0)
    g = moments_from_density(fock_state(40, 0), ops)
    assert g.P2 == pytest.approx(0.5, abs=1e-12)
    assert g.Q2 == pytest.approx(0.5, abs=1e-12)
    assert g.PQ == pytest.approx(0.0, abs=1e-12)
    c = moments_from_density(coherent_state(40, 0.8), ops)
    assert c.meanQ == pytest.approx(math.sqrt(2) * 0.8, abs=1e-10)
    assert c.meanP == pytest.approx(0.0, abs=1e-12)
    assert c.uncertainty_product == pytest.approx(0.25, abs=1e-9)
    mm = moments_from_density(maximally_mixed(10), make_oscillator_ops(10))
    assert abs(mm.meanP) < 1e-14 and abs(mm.meanQ) < 1e-14


def test_moments_from_density_rejects_non_hermitian():
    ops = make_oscillator_ops(4)
    bad = np.eye(4, dtype=complex) / 4
    bad[0, 1] = 0.3j
    with pytest.raises(ImaginaryExpectationError):
        moments_from_density(bad, ops)


def test_uncertainty_product_of_thermal_steady_state():
    s = steady_moments(MomentParams(1.0, 0.3, 0.1, 1.0))
    assert s.uncertainty_product >= 0.25 - 1e-12
