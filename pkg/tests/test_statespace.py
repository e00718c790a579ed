from statistics import NormalDist

import numpy as np
import pytest

from sepprob.lowdisc import QmcStream
from sepprob.statespace import (DegenerateCoordinates, NonHermitianInput, Spectrum, assemble_state,
                                eigvalsh_batch, haar_unitaries, haar_unitary, hermitian_eigen, norm_ppf,
                                partial_transpose, partial_transpose_batch, simplex_spectra, simplex_spectrum,
                                spin_flip, unitary_coord_count)

from conftest import PHI_PLUS, random_density, state_from_matrix


def test_norm_ppf_against_stdlib():
    p = np.concatenate([np.linspace(1e-6, 1 - 1e-6, 2001), [1e-12, 0.02425, 0.5, 0.97575]])
    ref = np.array([NormalDist().inv_cdf(x) for x in p])
    assert np.max(np.abs(norm_ppf(p) - ref) / np.maximum(1.0, np.abs(ref))) < 1.5e-9


def qmc_unitaries(n, field, m, seed=0):
    s = QmcStream(unitary_coord_count(n, field), scramble_seed=seed)
    u, ok = haar_unitaries(s.points(1, m), n, field)
    return u[ok]


@pytest.mark.parametrize("field", ["real", "complex"])
def test_unitarity(field, backend):
    for u in qmc_unitaries(4, field, 200):
        assert np.allclose(u.conj().T @ u, np.eye(4), atol=1e-12)


def test_identity_adjacent_seed_is_unitary():
    # coordinates mapping the Ginibre seed near the identity; (re, im) interleaved
    n = 4
    z = np.full((n, n), 0.5)
    np.fill_diagonal(z, 0.999)
    coords = np.column_stack([z.ravel(), np.full(n * n, 0.5)]).ravel()
    u = haar_unitary(coords, n, "complex")
    assert np.allclose(u.conj().T @ u, np.eye(n), atol=1e-12)
    assert np.allclose(np.abs(np.diag(u)), 1.0, atol=1e-12)


def test_degenerate_coordinates_raise():
    with pytest.raises(DegenerateCoordinates):
        haar_unitary(np.zeros(32), 4, "complex")
    with pytest.raises(DegenerateCoordinates):
        haar_unitary(np.full(32, 0.5), 4, "complex")


def test_haar_moments_qmc():
    u = qmc_unitaries(4, "complex", 10**5)
    a = np.abs(u[:, 0, 0]) ** 2
    assert abs(a.mean() - 0.25) < 0.005
    assert abs((a**2).mean() - 0.1) < 0.005


def test_haar_fourth_moment_independent_sampler():
    # Mezzadri QR sampler driven by a pseudo-random generator
    rng = np.random.default_rng(12345)
    z = (rng.standard_normal((10**5, 4, 4)) + 1j * rng.standard_normal((10**5, 4, 4))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=1, axis2=2)
    q = q * (d / np.abs(d))[:, None, :]
    a = np.abs(q[:, 0, 0]) ** 4
    ours = np.abs(qmc_unitaries(4, "complex", 10**5)[:, 0, 0]) ** 4
    assert abs(a.mean() - 0.1) < 0.005
    assert abs(ours.mean() - a.mean()) < 0.005


def test_simplex_equal_coords():
    s = simplex_spectrum(np.full(4, 0.3), 4)
    assert np.allclose(s.values, 0.25, atol=1e-15)


def test_simplex_mean_largest():
    pts = QmcStream(4, scramble_seed=0).points(1, 10**5)
    lam, ok = simplex_spectra(pts)
    assert ok.all()
    assert abs(lam[:, 0].mean() - 25 / 48) < 0.01


def test_simplex_contract():
    pts = QmcStream(5, scramble_seed=2).points(1, 1000)
    for row in pts[:50]:
        s = simplex_spectrum(row, 5, n_levels=6)
        assert s.values.size == 6 and s.values[-1] == 0.0
        assert np.all(np.diff(s.values) <= 0) and abs(s.values.sum() - 1) <= 1e-15
    with pytest.raises(ValueError):
        simplex_spectrum(np.full(2, 0.5), 2)
    with pytest.raises(DegenerateCoordinates):
        simplex_spectrum(np.array([0.5, 0.5, 1.0]), 3)


def test_spectrum_validation():
    with pytest.raises(ValueError):
        Spectrum(np.array([0.2, 0.8]), 2)
    with pytest.raises(ValueError):
        Spectrum(np.array([0.6, 0.6]), 2)


def test_assembly_examples():
    st = assemble_state(np.eye(4), np.array([1.0, 0, 0, 0]), (2, 2), "complex")
    proj = np.zeros((4, 4))
    proj[0, 0] = 1
    assert np.allclose(st.matrix, proj)
    u = qmc_unitaries(4, "complex", 3)[2]
    st = assemble_state(u, np.full(4, 0.25), (2, 2), "complex")
    assert np.allclose(st.matrix, np.eye(4) / 4, atol=1e-15)


def test_assembly_contract():
    u = qmc_unitaries(6, "complex", 5)[1]
    st = assemble_state(u, simplex_spectrum(np.array([0.1, 0.4, 0.7, 0.2, 0.9]), 5, 6), (2, 3), "complex")
    assert abs(np.trace(st.matrix) - 1) < 1e-14
    assert np.array_equal(st.matrix, st.matrix.conj().T)
    assert st.rank_target == 5
    with pytest.raises(ValueError):
        assemble_state(np.eye(3), np.full(4, 0.25), (2, 2), "complex")


def test_partial_transpose_product_state():
    rng = np.random.default_rng(0)
    a, b = random_density(rng, 2), random_density(rng, 2)
    pt = partial_transpose(np.kron(a, b))
    assert np.allclose(pt, np.kron(a, b.T))
    assert np.linalg.eigvalsh(pt).min() >= -1e-14


def test_partial_transpose_bell_and_involution():
    bell = np.outer(PHI_PLUS, PHI_PLUS)
    assert np.allclose(np.sort(np.linalg.eigvalsh(partial_transpose(bell))), [-0.5, 0.5, 0.5, 0.5])
    rng = np.random.default_rng(1)
    for dims in [(2, 2), (2, 3)]:
        rho = random_density(rng, dims[0] * dims[1])[None]
        assert np.array_equal(partial_transpose_batch(partial_transpose_batch(rho, dims), dims), rho)


def test_eigen_examples(backend):
    d = np.diag([0.1, 0.2, 0.3, 0.4]).astype(complex)
    assert np.allclose(eigvalsh_batch(d[None])[0], [0.1, 0.2, 0.3, 0.4], atol=1e-15)
    bell_pt = partial_transpose(np.outer(PHI_PLUS, PHI_PLUS))
    assert np.allclose(eigvalsh_batch(bell_pt[None])[0], [-0.5, 0.5, 0.5, 0.5], atol=1e-14)


def test_eigen_vs_characteristic_polynomial(backend):
    rng = np.random.default_rng(7)
    for _ in range(50):
        g = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        h = g + g.conj().T
        roots = np.sort(np.roots(np.poly(h)).real)
        assert np.allclose(eigvalsh_batch(h[None])[0], roots, atol=1e-9)


def test_hermitian_eigen_vectors():
    rng = np.random.default_rng(3)
    h = random_density(rng, 6)
    w, v = hermitian_eigen(h, vectors=True)
    assert np.allclose(v @ np.diag(w) @ v.conj().T, h, atol=1e-13)
    with pytest.raises(NonHermitianInput):
        hermitian_eigen(np.array([[0, 1], [0, 0]], dtype=complex))


def test_spin_flip_examples():
    mixed = state_from_matrix(np.eye(4) / 4)
    assert np.allclose(spin_flip(mixed), np.eye(4) / 4)
    bell = np.outer(PHI_PLUS, PHI_PLUS)
    assert np.allclose(spin_flip(state_from_matrix(bell)), bell)
    rho = random_density(np.random.default_rng(2))
    assert abs(np.trace(spin_flip(state_from_matrix(rho))) - 1) < 1e-14
