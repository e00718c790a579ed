"""The numba kernels and their numpy fallbacks must agree."""

import os
import subprocess
import sys

import numpy as np
import pytest

from sepprob import _accel
from sepprob import criteria as cr
from sepprob.estimator import alpha_curve, default_grid, get_system, sample_states
from sepprob.lowdisc import QmcStream
from sepprob.statespace import eigvalsh_batch, haar_unitaries, partial_transpose_batch, unitary_coord_count


def both(fn):
    out = {}
    for name in ("numba", "numpy"):
        prev = _accel.set_backend(name)
        try:
            out[name] = fn()
        finally:
            _accel.set_backend(prev)
    return out["numba"], out["numpy"]


def test_faure_identical():
    s = QmcStream(35, scramble_seed=17)
    a, b = both(lambda: s.points(12345, 4000))
    assert np.array_equal(a, b)


@pytest.mark.parametrize("field,n", [("complex", 4), ("real", 4), ("complex", 6)])
def test_haar_agree(field, n):
    pts = QmcStream(unitary_coord_count(n, field), scramble_seed=3).points(1, 2000)
    (ua, oka), (ub, okb) = both(lambda: haar_unitaries(pts, n, field))
    assert np.array_equal(oka, okb)
    assert np.allclose(ua, ub, atol=1e-13, rtol=0)


def test_eigvalsh_agree():
    rng = np.random.default_rng(0)
    g = rng.standard_normal((500, 6, 6)) + 1j * rng.standard_normal((500, 6, 6))
    h = g + np.conj(np.swapaxes(g, 1, 2))
    a, b = both(lambda: eigvalsh_batch(h))
    assert np.allclose(a, b, atol=1e-12, rtol=0)
    assert np.allclose(a, np.linalg.eigvalsh(h), atol=1e-11, rtol=0)


def test_convdet_agree():
    s = get_system("2q-complex")
    st = sample_states(s, QmcStream(s.coord_count, scramble_seed=8), 1, 3000)
    (ta, ma), (tb, mb) = both(lambda: cr.convdet_thresholds(st.rho, st.pt, st.spectra, st.pt_eigs))
    assert ma == mb
    assert np.allclose(ta, tb, atol=1e-9, rtol=0)


def test_curve_agrees_across_backends():
    grid = default_grid(50)
    a, b = both(lambda: alpha_curve("2q-complex", "det", ["hs"], 8192, grid, seed=2))
    assert np.allclose(a.p["hs"], b.p["hs"], atol=1e-12)


def test_env_var_selects_numpy():
    env = dict(os.environ, SEPPROB_DISABLE_JIT="1")
    out = subprocess.run([sys.executable, "-c", "from sepprob import _accel; print(_accel.backend())"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"


def test_set_backend_validation():
    with pytest.raises(ValueError):
        _accel.set_backend("cuda")
    assert _accel.set_backend(_accel.backend()) in ("numba", "numpy")


def test_partial_transpose_batch_shape():
    rho = np.zeros((3, 6, 6), complex)
    assert partial_transpose_batch(rho, (2, 3)).shape == (3, 6, 6)
