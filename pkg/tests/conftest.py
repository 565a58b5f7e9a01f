import numpy as np
import pytest

from rpimeasure.measurement import MeasurementModel

_ACCEPTANCE_LINES = []


def random_hermitian(rng, d, scale=1.0):
    X = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * 0.5 * (X + X.conj().T)


def random_density(rng, d):
    X = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    r = X @ X.conj().T
    return r / np.trace(r)


def random_model(rng, d, with_C=True):
    return MeasurementModel(
        A=random_hermitian(rng, d), B=random_hermitian(rng, d),
        C=random_hermitian(rng, d) if with_C else None,
        kappa=rng.uniform(0.1, 2.0), lam=rng.uniform(0.0, 2.0), hbar=rng.uniform(0.5, 2.0))


def trace_distance(r1, r2):
    D = np.asarray(r1) - np.asarray(r2)
    D = 0.5 * (D + D.conj().T)
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(D))))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def acceptance_report():
    def report(criterion, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return passed
    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
