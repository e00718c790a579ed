"""Uniform points to density matrices, plus partial transpose and eigensolving.

Coordinate layout for one sample of an ``N``-level state with ``k`` nonzero
eigenvalues: the first ``2 N^2`` (complex) or ``N^2`` (real) coordinates feed
the Haar unitary, the next ``k`` feed the spectrum.

The unitary is the Q factor (positive real diagonal R) of a Ginibre matrix
whose Gaussian entries come from an inverse normal CDF.  The spectrum is a
uniform point on the ordered simplex built from exponential spacings.
"""

from dataclasses import dataclass, field as dc_field

import numpy as np

from . import _accel

PSD_TOL = 1e-10
HERMITIAN_TOL = 1e-10
JACOBI_TOL = 1e-13
JACOBI_MAX_SWEEPS = 60
# a Gram-Schmidt residual this small relative to the column norm means the
# Ginibre seed is numerically rank deficient
DEGENERATE_RTOL = 1e-10

FIELDS = ("real", "complex")


class DegenerateCoordinates(ValueError):
    """Coordinates hit a probability-zero degenerate set; perturb and retry."""


class NonHermitianInput(ValueError):
    pass


@dataclass(frozen=True)
class Spectrum:
    values: np.ndarray
    rank: int

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if np.any(np.diff(v) > 0):
            raise ValueError("spectrum must be nonincreasing")
        if np.any(v < 0) or abs(v.sum() - 1.0) > 1e-14:
            raise ValueError("spectrum must be a point of the probability simplex")
        object.__setattr__(self, "values", v)

    def padded(self, n):
        out = np.zeros(n)
        out[: self.values.size] = self.values
        return out


@dataclass(frozen=True)
class QuantumState:
    """Density matrix with the spectrum it was built from.

    ``spectrum`` is descending and padded to ``N``; ``unitary`` (when known)
    diagonalizes ``matrix`` so spectral functions need no eigensolve.
    """

    matrix: np.ndarray
    field: str
    dims: tuple
    rank_target: int
    spectrum: np.ndarray
    unitary: np.ndarray = dc_field(default=None, repr=False, compare=False)

    @property
    def n(self):
        return self.dims[0] * self.dims[1]


# -- inverse normal CDF (Acklam rational approximation, |error| < 1.2e-9) --

_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


@_accel.njit
def _norm_ppf_scalar(p):
    if p < _P_LOW:
        q = np.sqrt(-2.0 * np.log(p))
        return (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / (
            (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        )
    if p > 1.0 - _P_LOW:
        q = np.sqrt(-2.0 * np.log(1.0 - p))
        return -(((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / (
            (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        )
    q = p - 0.5
    r = q * q
    return (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / (
        ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
    )


def norm_ppf(p):
    """Inverse standard normal CDF on (0, 1), elementwise."""
    p = np.asarray(p, dtype=float)
    out = np.empty_like(p)
    lo = p < _P_LOW
    hi = p > 1.0 - _P_LOW
    mid = ~(lo | hi)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.sqrt(-2.0 * np.log(p[lo]))
        out[lo] = (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / (
            (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        )
        q = np.sqrt(-2.0 * np.log(1.0 - p[hi]))
        out[hi] = -(((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / (
            (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        )
    q = p[mid] - 0.5
    r = q * q
    out[mid] = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / (
        ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
    )
    return out


# -- Haar unitaries --------------------------------------------------------


def unitary_coord_count(n, field):
    return 2 * n * n if field == "complex" else n * n


@_accel.njit
def _haar_jit(coords, n, cplx):
    m = coords.shape[0]
    out = np.zeros((m, n, n), np.complex128)
    ok = np.ones(m, np.bool_)
    z = np.empty((n, n), np.complex128)
    for s in range(m):
        bad = False
        for i in range(n):
            for j in range(n):
                if cplx:
                    u0 = coords[s, 2 * (i * n + j)]
                    u1 = coords[s, 2 * (i * n + j) + 1]
                    if u0 <= 0.0 or u0 >= 1.0 or u1 <= 0.0 or u1 >= 1.0:
                        bad = True
                        break
                    z[i, j] = complex(_norm_ppf_scalar(u0), _norm_ppf_scalar(u1))
                else:
                    u0 = coords[s, i * n + j]
                    if u0 <= 0.0 or u0 >= 1.0:
                        bad = True
                        break
                    z[i, j] = _norm_ppf_scalar(u0)
            if bad:
                break
        if bad:
            ok[s] = False
            continue
        # Gram-Schmidt applied twice per column; R's diagonal is the positive
        # residual norm, which fixes the Haar phase convention
        for j in range(n):
            col_norm = 0.0
            for i in range(n):
                col_norm += z[i, j].real ** 2 + z[i, j].imag ** 2
            col_norm = np.sqrt(col_norm)
            for _ in range(2):
                for k in range(j):
                    r = 0j
                    for i in range(n):
                        r += np.conj(out[s, i, k]) * z[i, j]
                    for i in range(n):
                        z[i, j] -= r * out[s, i, k]
            nrm = 0.0
            for i in range(n):
                nrm += z[i, j].real ** 2 + z[i, j].imag ** 2
            nrm = np.sqrt(nrm)
            if not nrm > DEGENERATE_RTOL * col_norm:
                bad = True
                break
            for i in range(n):
                out[s, i, j] = z[i, j] / nrm
        if bad:
            ok[s] = False
            out[s] = 0.0
    return out, ok


def _haar_np(coords, n, cplx):
    m = coords.shape[0]
    ok = np.all((coords > 0.0) & (coords < 1.0), axis=1)
    safe = np.where(ok[:, None], coords, 0.5)
    g = norm_ppf(safe)
    if cplx:
        z = (g[:, 0::2] + 1j * g[:, 1::2]).reshape(m, n, n)
    else:
        z = g.reshape(m, n, n).astype(np.complex128)
    q = np.zeros((m, n, n), np.complex128)
    for j in range(n):
        v = z[:, :, j].copy()
        col_norm = np.sqrt(np.sum(v.real**2 + v.imag**2, axis=1))
        for _ in range(2):
            for k in range(j):
                r = np.sum(np.conj(q[:, :, k]) * v, axis=1)
                v -= r[:, None] * q[:, :, k]
        nrm = np.sqrt(np.sum(v.real**2 + v.imag**2, axis=1))
        good = nrm > DEGENERATE_RTOL * col_norm
        ok &= good
        q[:, :, j] = v / np.where(good, nrm, 1.0)[:, None]
    q[~ok] = 0.0
    return q, ok


def haar_unitaries(coords, n, field):
    """Batched Haar map: ``coords`` of shape (m, 2n^2 or n^2).

    Returns ``(U, ok)``; rows with ``ok == False`` had a coordinate outside
    (0, 1) or a degenerate Ginibre seed and hold zeros.
    """
    coords = np.ascontiguousarray(coords, dtype=float)
    cplx = field == "complex"
    if coords.shape[1] != unitary_coord_count(n, field):
        raise ValueError("coordinate count does not match unitary size")
    if _accel.use_jit():
        return _haar_jit(coords, n, cplx)
    return _haar_np(coords, n, cplx)


def haar_unitary(coords, n, field):
    """Haar-distributed unitary (orthogonal for ``field='real'``) from uniforms.

    Raises:
        DegenerateCoordinates: a coordinate is outside (0, 1) or the Ginibre
            seed is numerically rank deficient.
    """
    if field not in FIELDS:
        raise ValueError(f"field must be one of {FIELDS}")
    u, ok = haar_unitaries(np.asarray(coords, dtype=float)[None, :], n, field)
    if not ok[0]:
        raise DegenerateCoordinates("degenerate Haar coordinates; perturb and retry")
    return u[0] if field == "complex" else u[0].real.copy()


# -- spectra ---------------------------------------------------------------


def simplex_spectra(coords, n_levels=None):
    """Batched ordered-simplex points from (m, k) uniforms.

    Returns ``(spectra, ok)`` with spectra of shape (m, n_levels) sorted
    descending and zero padded.
    """
    coords = np.asarray(coords, dtype=float)
    m, k = coords.shape
    n_levels = k if n_levels is None else n_levels
    ok = np.all((coords > 0.0) & (coords < 1.0), axis=1)
    e = -np.log(np.where(ok[:, None], coords, 0.5))
    lam = e / e.sum(axis=1, keepdims=True)
    lam = -np.sort(-lam, axis=1)
    out = np.zeros((m, n_levels))
    out[:, :k] = lam
    return out, ok


def simplex_spectrum(coords, k, n_levels=None):
    """Uniform point on the ordered (k-1)-simplex via exponential spacings."""
    coords = np.asarray(coords, dtype=float)
    if coords.shape != (k,):
        raise ValueError(f"expected {k} coordinates")
    if k not in (3, 4, 5, 6):
        raise ValueError("rank must be in {3, 4, 5, 6}")
    lam, ok = simplex_spectra(coords[None, :], k)
    if not ok[0]:
        raise DegenerateCoordinates("spectrum coordinate outside (0, 1)")
    vals = lam[0]
    # exact unit sum keeps downstream invariants tight
    vals[0] = 1.0 - vals[1:].sum()
    if n_levels is not None and n_levels > k:
        vals = np.concatenate([vals, np.zeros(n_levels - k)])
    return Spectrum(vals, k)


# -- state assembly --------------------------------------------------------


def assemble_states(u, spectra):
    """Batched ``U diag(spec) U^dagger``, made exactly Hermitian."""
    rho = np.einsum("mij,mj,mkj->mik", u, spectra, np.conj(u))
    return 0.5 * (rho + np.conj(np.swapaxes(rho, 1, 2)))


def assemble_state(u, spec, dims, field):
    n = dims[0] * dims[1]
    u = np.asarray(u)
    if u.shape != (n, n):
        raise ValueError("unitary size does not match dims")
    vals = spec.padded(n) if isinstance(spec, Spectrum) else np.asarray(spec, dtype=float)
    rank = spec.rank if isinstance(spec, Spectrum) else int(np.count_nonzero(vals))
    uc = u.astype(np.complex128)
    rho = assemble_states(uc[None], vals[None])[0]
    if field == "real":
        rho = rho.real.astype(np.complex128)
    return QuantumState(rho, field, tuple(dims), rank, vals.copy(), uc)


def partial_transpose_batch(rho, dims):
    """Transpose the second tensor factor of each matrix in a batch."""
    da, db = dims
    m = rho.shape[0]
    return rho.reshape(m, da, db, da, db).transpose(0, 1, 4, 3, 2).reshape(m, da * db, da * db)


def partial_transpose(state):
    mat = state.matrix if isinstance(state, QuantumState) else np.asarray(state)
    dims = state.dims if isinstance(state, QuantumState) else (2, mat.shape[0] // 2)
    return partial_transpose_batch(mat[None], dims)[0]


# -- cyclic Jacobi eigensolver ---------------------------------------------


@_accel.njit
def _jacobi_inplace(a, v, want_vectors):
    n = a.shape[0]
    scale = 0.0
    for i in range(n):
        for j in range(n):
            scale += a[i, j].real ** 2 + a[i, j].imag ** 2
    tol = JACOBI_TOL * max(1.0, np.sqrt(scale))
    for _ in range(JACOBI_MAX_SWEEPS):
        off = 0.0
        for p in range(n):
            for q in range(p + 1, n):
                off += a[p, q].real ** 2 + a[p, q].imag ** 2
        if np.sqrt(2.0 * off) < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                g = abs(apq)
                if g < 1e-300:
                    continue
                e = apq / g
                theta = (a[q, q].real - a[p, p].real) / (2.0 * g)
                t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                se = s * e
                sec = s * np.conj(e)
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - sec * akq
                    a[k, q] = se * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - se * aqk
                    a[q, k] = sec * apk + c * aqk
                a[p, q] = 0.0
                a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
                if want_vectors:
                    for k in range(n):
                        vkp = v[k, p]
                        vkq = v[k, q]
                        v[k, p] = c * vkp - sec * vkq
                        v[k, q] = se * vkp + c * vkq


@_accel.njit
def _eigvalsh_jit(mats):
    m, n, _ = mats.shape
    out = np.empty((m, n))
    a = np.empty((n, n), np.complex128)
    v = np.empty((1, 1), np.complex128)
    for s in range(m):
        for i in range(n):
            for j in range(n):
                a[i, j] = mats[s, i, j]
        _jacobi_inplace(a, v, False)
        for i in range(n):
            out[s, i] = a[i, i].real
        out[s].sort()
    return out


def _eigvalsh_np(mats):
    a = np.array(mats, dtype=np.complex128)
    m, n, _ = a.shape
    scale = np.sqrt(np.sum(np.abs(a) ** 2, axis=(1, 2)))
    tol = JACOBI_TOL * np.maximum(1.0, scale)
    iu = np.triu_indices(n, 1)
    for _ in range(JACOBI_MAX_SWEEPS):
        off = np.sqrt(2.0 * np.sum(np.abs(a[:, iu[0], iu[1]]) ** 2, axis=1))
        active = off >= tol
        if not active.any():
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[:, p, q]
                g = np.abs(apq)
                rot = active & (g >= 1e-300)
                gs = np.where(rot, g, 1.0)
                e = np.where(rot, apq / gs, 1.0)
                theta = (a[:, q, q].real - a[:, p, p].real) / (2.0 * gs)
                t = 1.0 / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
                t = np.where(theta < 0.0, -t, t)
                t = np.where(rot, t, 0.0)
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                se = (s * e)[:, None]
                sec = (s * np.conj(e))[:, None]
                cc = c[:, None]
                akp = a[:, :, p].copy()
                akq = a[:, :, q].copy()
                a[:, :, p] = cc * akp - sec * akq
                a[:, :, q] = se * akp + cc * akq
                apk = a[:, p, :].copy()
                aqk = a[:, q, :].copy()
                a[:, p, :] = cc * apk - se * aqk
                a[:, q, :] = sec * apk + cc * aqk
                a[rot, p, q] = 0.0
                a[rot, q, p] = 0.0
                a[:, p, p] = a[:, p, p].real
                a[:, q, q] = a[:, q, q].real
    return np.sort(np.einsum("mii->mi", a).real, axis=1)


def eigvalsh_batch(mats):
    """Ascending eigenvalues of a batch of small Hermitian matrices (Jacobi)."""
    mats = np.ascontiguousarray(mats, dtype=np.complex128)
    if _accel.use_jit():
        return _eigvalsh_jit(mats)
    return _eigvalsh_np(mats)


def hermitian_eigen(m, vectors=False):
    """Ascending eigenvalues (and optionally eigenvectors) of a Hermitian matrix.

    Raises:
        NonHermitianInput: ``max |M - M^dagger|`` exceeds ``HERMITIAN_TOL``.
    """
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("square matrix required")
    if np.max(np.abs(m - np.conj(m.T))) > HERMITIAN_TOL:
        raise NonHermitianInput("matrix is not Hermitian within tolerance")
    a = 0.5 * (m + np.conj(m.T)).astype(np.complex128)
    if not vectors:
        return eigvalsh_batch(a[None])[0]
    n = a.shape[0]
    v = np.eye(n, dtype=np.complex128)
    # single matrix: the uncompiled loop is the numpy-backend path here
    kernel = _jacobi_inplace if _accel.use_jit() else getattr(_jacobi_inplace, "py_func", _jacobi_inplace)
    kernel(a, v, True)
    w = np.diag(a).real
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


# -- spin flip -------------------------------------------------------------

_FLIP_SIGN = np.array([-1.0, 1.0, 1.0, -1.0])


def spin_flip_batch(rho):
    """``(sigma_y x sigma_y) rho^* (sigma_y x sigma_y)`` for a batch of 4x4."""
    flipped = np.conj(rho[:, ::-1, ::-1])
    return flipped * np.outer(_FLIP_SIGN, _FLIP_SIGN)[None]


def spin_flip(state):
    if isinstance(state, QuantumState):
        if state.dims != (2, 2):
            raise ValueError("spin flip is only defined for two-qubit states")
        mat = state.matrix
    else:
        mat = np.asarray(state)
        if mat.shape != (4, 4):
            raise ValueError("spin flip is only defined for two-qubit states")
    return spin_flip_batch(mat[None].astype(np.complex128))[0]
