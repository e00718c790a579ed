import numpy as np
import pytest

from sepprob import _accel
from sepprob.statespace import QuantumState

PHI_PLUS = np.array([1.0, 0.0, 0.0, 1.0]) / np.sqrt(2.0)


def state_from_matrix(rho, field="complex", dims=(2, 2), rank=None):
    """QuantumState built with numpy's eigh (independent of the Jacobi solver).

    ``rank`` is the rank target of the system the state belongs to; it
    defaults to full rank whatever the numerical rank of ``rho`` is.
    """
    rho = np.asarray(rho, dtype=np.complex128)
    w, v = np.linalg.eigh(rho)
    w = np.clip(w[::-1], 0.0, None)
    v = v[:, ::-1]
    rank = dims[0] * dims[1] if rank is None else rank
    return QuantumState(rho, field, dims, rank, w, v)


def werner(p):
    bell = np.outer(PHI_PLUS, PHI_PLUS)
    return state_from_matrix(p * bell + (1 - p) * np.eye(4) / 4)


def bell():
    return state_from_matrix(np.outer(PHI_PLUS, PHI_PLUS))


def random_density(rng, n=4, rank=None, real=False):
    rank = n if rank is None else rank
    g = rng.standard_normal((n, rank))
    if not real:
        g = g + 1j * rng.standard_normal((n, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


@pytest.fixture(params=["numba", "numpy"])
def backend(request):
    previous = _accel.set_backend(request.param)
    yield request.param
    _accel.set_backend(previous)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import LINES
    except ImportError:
        return
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
