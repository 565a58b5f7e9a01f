import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_density, random_hermitian, random_model
from rpimeasure.errors import (
    DegenerateKernelError,
    DimensionCapError,
    DimensionMismatchError,
    PositivityError,
    StepSizeError,
    TruncationWarning,
)
from rpimeasure.master import (
    build_liouvillian,
    evolve,
    rhs_double_commutator,
    rhs_lindblad,
    steady_state,
    suggested_dt,
    unvec,
    vec,
)
from rpimeasure.measurement import (
    MeasurementModel,
    effective_hamiltonian,
    lindblad_operator,
    oscillator_model,
)
from rpimeasure.moments import MomentParams, moments_from_density, steady_moments
from rpimeasure.operators import (
    DensityMatrix,
    coherent_state,
    commutator,
    expectation,
    make_oscillator_ops,
    maximally_mixed,
)


def test_double_commutator_minimally_disturbing_limit(rng):
    A, H = random_hermitian(rng, 5), random_hermitian(rng, 5)
    m = MeasurementModel(A=A, B=random_hermitian(rng, 5), kappa=0.6, lam=0.0, hbar=0.8)
    rho = random_density(rng, 5)
    expected = -1j / 0.8 * commutator(H, rho) - 0.3 * commutator(A, commutator(A, rho))
    np.testing.assert_allclose(rhs_double_commutator(m, H, rho), expected, atol=1e-14)


def test_double_commutator_on_identity(rng):
    # {A, I/d} = 2A/d, so the output is -(i lam / (hbar d)) [B, A]
    d = 6
    m = MeasurementModel(A=random_hermitian(rng, d), B=random_hermitian(rng, d),
                         kappa=0.9, lam=1.3, hbar=0.7)
    out = rhs_double_commutator(m, np.zeros((d, d)), np.eye(d) / d)
    expected = -1j * 1.3 / (0.7 * d) * commutator(m.B, m.A)
    np.testing.assert_allclose(out, expected, atol=1e-14)


def test_lindblad_minimally_disturbing_limit(rng):
    A, H = random_hermitian(rng, 4), random_hermitian(rng, 4)
    m = MeasurementModel(A=A, B=random_hermitian(rng, 4), kappa=1.1, lam=0.0)
    rho = random_density(rng, 4)
    expected = -1j * commutator(H, rho) - 0.55 * (A @ A @ rho - 2 * A @ rho @ A + rho @ A @ A)
    np.testing.assert_allclose(rhs_lindblad(m, H, rho), expected, atol=1e-13)


def test_lindblad_matches_double_commutator_dim4(rng):
    m = random_model(rng, 4)
    H, rho = random_hermitian(rng, 4), random_density(rng, 4)
    assert np.max(np.abs(rhs_lindblad(m, H, rho) - rhs_double_commutator(m, H, rho))) < 1e-12


def test_printed_last_term_ordering_is_not_equivalent(rng):
    # the alternative ordering "rho l l^dag" breaks both trace preservation and the equivalence
    m = random_model(rng, 5)
    H, rho = random_hermitian(rng, 5), random_density(rng, 5)
    l = lindblad_operator(m)
    ld = l.conj().T
    H_eff = effective_hamiltonian(m, H).op
    alt = -1j / m.hbar * commutator(H_eff, rho) - 0.5 * m.kappa * (
        ld @ l @ rho - 2 * l @ rho @ ld + rho @ l @ ld)
    ref = rhs_double_commutator(m, H, rho)
    assert np.max(np.abs(alt - ref)) > 1e-3
    assert abs(np.trace(alt)) > 1e-3
    # and the difference is exactly i kappa c rho [A, B]
    c = m.lam / (2 * m.kappa * m.hbar)
    np.testing.assert_allclose(alt - ref, -1j * m.kappa * c * rho @ commutator(m.A, m.B),
                               atol=1e-12)


@settings(max_examples=80, deadline=None)
@given(dim=st.integers(2, 16), seed=st.integers(0, 2**32 - 1))
def test_rhs_forms_agree_and_preserve_trace_and_hermiticity(dim, seed):
    rng = np.random.default_rng(seed)
    m = random_model(rng, dim)
    H, rho = random_hermitian(rng, dim), random_density(rng, dim)
    a = rhs_lindblad(m, H, rho)
    b = rhs_double_commutator(m, H, rho)
    assert np.max(np.abs(a - b)) < 1e-12
    assert abs(np.trace(a)) < 1e-12
    assert abs(np.trace(b)) < 1e-12
    assert np.max(np.abs(a - a.conj().T)) < 1e-12


def test_rhs_dimension_mismatch(rng):
    m = random_model(rng, 3)
    with pytest.raises(DimensionMismatchError):
        rhs_lindblad(m, np.eye(3), np.eye(4) / 4)
    with pytest.raises(DimensionMismatchError):
        rhs_double_commutator(m, np.eye(2), np.eye(3) / 3)


def test_vectorization_is_row_major(rng):
    X, Y, R = (random_hermitian(rng, 3) for _ in range(3))
    np.testing.assert_allclose(vec(X @ R @ Y), np.kron(X, Y.T) @ vec(R), atol=1e-13)
    np.testing.assert_array_equal(vec(R), R.reshape(-1))
    np.testing.assert_array_equal(unvec(vec(R), 3), R)
    assert vec(R)[1] == R[0, 1]


def test_liouvillian_matches_rhs(rng):
    m = random_model(rng, 5)
    H = random_hermitian(rng, 5)
    L = build_liouvillian(m, H)
    worst = 0.0
    for _ in range(100):
        rho = random_density(rng, 5)
        worst = max(worst, np.max(np.abs(L.apply(rho) - rhs_lindblad(m, H, rho))))
    assert worst < 1e-12


def test_liouvillian_trace_functional_annihilated(rng):
    m = random_model(rng, 7)
    L = build_liouvillian(m, random_hermitian(rng, 7))
    assert np.max(np.abs(np.eye(7).reshape(-1) @ L.matrix)) < 1e-10


def test_liouvillian_unitary_spectrum():
    A = np.diag([1.0, -1.0])
    m = MeasurementModel(A=A, B=A, kappa=1e-300, lam=0.0)
    L = build_liouvillian(m, np.diag([0.5, -0.5]))
    ev = np.linalg.eigvals(L.matrix)
    assert np.max(np.abs(ev.real)) < 1e-12
    np.testing.assert_allclose(sorted(ev.imag), [-1, 0, 0, 1], atol=1e-12)


def test_liouvillian_cap():
    ops = make_oscillator_ops(65)
    with pytest.raises(DimensionCapError):
        build_liouvillian(oscillator_model(ops, 0.1, 0.2), ops.H)


def test_evolve_unitary_coherent_oscillation():
    # <Q>(t) = sqrt(2) cos(omega t) for alpha = 1, omega = hbar = 1
    ops = make_oscillator_ops(40, 1.0, 1.0)
    m = MeasurementModel(A=ops.P, B=ops.Q, kappa=1e-300, lam=0.0)
    t_final = 10 * 2 * math.pi
    dt = t_final / 40000
    ser = evolve(coherent_state(40, 1.0), m, ops.H, t_final, dt, output_stride=400)
    q = ser.expectation(ops.Q)
    np.testing.assert_allclose(q, math.sqrt(2) * np.cos(ser.times), atol=1e-6)


def test_evolve_diagnostics_and_trace():
    ops = make_oscillator_ops(30, 1.0, 1.0)
    m = oscillator_model(ops, 0.1, 0.2)
    ser = evolve(coherent_state(30, 1.0), m, ops.H, 3.0, 1e-3, output_stride=100)
    assert not ser.flagged
    assert ser.max_trace_drift < 1e-8
    assert np.all(ser.trace_drift < 1e-8)
    assert np.all(ser.min_eig > -1e-6)
    assert np.all(ser.hermiticity < 1e-10)
    assert len(ser.times) == 31
    assert ser.times[-1] == pytest.approx(3.0)


def test_evolve_matches_matrix_exponential(rng):
    m = random_model(rng, 4)
    H = random_hermitian(rng, 4)
    rho0 = random_density(rng, 4)
    ser = evolve(rho0, m, H, 0.5, 1e-3, output_stride=500, stability_limit=10,
                 leak_tol=1.0)
    L = build_liouvillian(m, H)
    exact = unvec(scipy.linalg.expm(0.5 * L.matrix) @ vec(rho0), 4)
    assert np.max(np.abs(ser.final.data - exact)) < 1e-10


def test_evolve_step_size_rejection():
    ops = make_oscillator_ops(20)
    m = oscillator_model(ops, 0.1, 0.2)
    with pytest.raises(StepSizeError):
        evolve(coherent_state(20, 1.0), m, ops.H, 1.0, 0.5)
    with pytest.raises(StepSizeError):
        evolve(coherent_state(20, 1.0), m, ops.H, 1.0, 0.0)
    with pytest.raises(StepSizeError):
        evolve(coherent_state(20, 1.0), m, ops.H, 1.0, 0.3)


def test_evolve_positivity_policy():
    ops = make_oscillator_ops(4)
    m = oscillator_model(ops, 0.1, 0.2)
    bad = DensityMatrix(np.diag([1.1, 0.0, 0.0, -0.1]), check=False)
    with pytest.raises(PositivityError):
        evolve(bad, m, ops.H, 0.01, 1e-3, positivity_policy="raise")
    with pytest.warns(UserWarning):
        ser = evolve(bad, m, ops.H, 0.01, 1e-3)
    assert ser.flagged


def test_suggested_dt_heuristic():
    ops = make_oscillator_ops(10)
    m = oscillator_model(ops, 0.1, 0.2)
    normA = np.linalg.norm(ops.P, 2)
    assert suggested_dt(m, 1.0) == pytest.approx(0.01 / max(1.0, 0.1 * normA**2, 0.2))


def test_purity_does_not_grow_from_maximally_mixed():
    ops = make_oscillator_ops(12)
    m = oscillator_model(ops, 0.4, 0.0)
    rho = maximally_mixed(12)
    dpurity = 2 * np.real(np.trace(rho.data @ rhs_lindblad(m, ops.H, rho)))
    assert dpurity <= 1e-10


def test_steady_state_matches_closed_form_moments():
    ops = make_oscillator_ops(40, 1.0, 1.0)
    m = oscillator_model(ops, 0.1, 0.2)
    ss = steady_state(m, ops.H)
    assert ss.residual < 1e-10
    assert not ss.flagged
    assert ss.min_eigenvalue >= -1e-8
    assert np.max(np.abs(ss.data - ss.data.conj().T)) < 1e-12
    got = moments_from_density(ss, ops).as_array()
    want = steady_moments(MomentParams(1.0, 0.2, 0.1, 1.0)).as_array()
    np.testing.assert_allclose(got, want, atol=1e-4)


def test_steady_state_cross_checked_by_long_evolution():
    ops = make_oscillator_ops(20, 1.0, 1.0)
    m = oscillator_model(ops, 0.5, 1.0)
    ss = steady_state(m, ops.H)
    ser = evolve(coherent_state(20, 0.5), m, ops.H, 60.0, 2e-3, output_stride=30000)
    assert np.max(np.abs(ser.final.data - ss.data)) < 1e-8


def test_steady_state_without_friction_is_flagged():
    ops = make_oscillator_ops(20, 1.0, 1.0)
    m = oscillator_model(ops, 0.1, 0.0)
    try:
        with pytest.warns(TruncationWarning):
            ss = steady_state(m, ops.H)
    except DegenerateKernelError:
        return
    assert ss.flagged
    assert ss.leak > 1e-6


def test_steady_state_degenerate_kernel():
    # a commuting, dissipation-free generator has every diagonal state stationary
    A = np.diag([1.0, 2.0, 3.0])
    m = MeasurementModel(A=A, B=A, kappa=0.5, lam=0.0)
    with pytest.raises(DegenerateKernelError):
        steady_state(m, A)
