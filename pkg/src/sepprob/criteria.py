"""Entanglement criteria and feasible-alpha sets of the convex PPT constraints.

Each constraint interpolates between a condition on ``rho`` (alpha = 0, always
satisfied) and the Peres-Horodecki condition on ``rho_PT`` (alpha = 1):

* ``det``: ``alpha det(rho_PT) + (1 - alpha) det(rho) >= 0``
* ``mineig``: ``alpha lmin(rho_PT) + (1 - alpha) lmin(rho) >= 0``
* ``convdet``: ``det(alpha rho_PT + (1 - alpha) rho) >= 0``
* ``convmineig``: ``lmin(alpha rho_PT + (1 - alpha) rho) >= 0``
* ``concurrence``: ``-alpha C + (1 - alpha) C_max >= 0``

Batched routines return thresholds ``t`` (feasible iff ``alpha <= t`` on
[0, 1]) with ``np.inf`` meaning every alpha in [0, 1].  Membership of
alpha = 1 is decided by the same PPT test as :func:`ppt_separable`, so curves
end exactly on the PPT probability.
"""

from dataclasses import dataclass

import numpy as np

from . import _accel
from .statespace import (
    PSD_TOL,
    QuantumState,
    Spectrum,
    eigvalsh_batch,
    partial_transpose,
    partial_transpose_batch,
    spin_flip_batch,
)

CONSTRAINTS = ("det", "mineig", "convdet", "convmineig", "concurrence")
CONCURRENCE_CLIP = 1e-8
CONCURRENCE_SLACK = 1e-6
BELOW_ONE = np.nextafter(1.0, 0.0)


class NumericalConsistencyError(ArithmeticError):
    pass


@dataclass(frozen=True)
class FeasibleAlphaSet:
    """Which alpha satisfy a constraint for one state.

    ``kind`` is ``"all"``, ``"threshold"`` (feasible iff alpha <= threshold)
    or ``"grid_mask"`` (explicit mask over ``grid``).
    """

    kind: str
    threshold: float = np.inf
    mask: np.ndarray = None
    grid: np.ndarray = None

    def contains(self, alpha):
        if self.kind == "all":
            return True
        if self.kind == "threshold":
            return alpha <= self.threshold
        hit = np.flatnonzero(np.isclose(self.grid, alpha, rtol=0, atol=1e-15))
        if hit.size == 0:
            raise ValueError("alpha is not a grid point of this mask")
        return bool(self.mask[hit[0]])

    @classmethod
    def from_threshold(cls, t):
        return cls("all") if np.isinf(t) else cls("threshold", float(t))


@dataclass(frozen=True)
class ConcurrencePair:
    c: float
    c_max: float
    c_max_raw: float


# -- maximal concurrence ---------------------------------------------------


def max_concurrence_batch(spectra, rank):
    """``(c_max, c_max_raw)`` for descending spectra of shape (m, N)."""
    lam = np.asarray(spectra, dtype=float)
    n = lam.shape[1]
    if n == 4 and rank == 4:
        raw = lam[:, 0] - lam[:, 2] - 2.0 * np.sqrt(lam[:, 1] * lam[:, 3])
    elif n == 4 and rank == 3:
        raw = lam[:, 0] - lam[:, 2]
    elif n == 6 and rank == 5:
        raw = lam[:, 0] - lam[:, 4]
    elif n == 6 and rank == 6:
        raw = lam[:, 0] - lam[:, 4] - 2.0 * np.sqrt(lam[:, 3] * lam[:, 5])
    else:
        raise ValueError(f"no maximal-concurrence formula for N={n}, rank={rank}")
    return np.maximum(raw, 0.0), raw


def _spec_and_rank(spec):
    if isinstance(spec, Spectrum):
        return spec.values, spec.rank
    if isinstance(spec, QuantumState):
        return spec.spectrum, spec.rank_target
    v = np.asarray(spec, dtype=float)
    return v, v.size


def maximal_concurrence(spec):
    vals, rank = _spec_and_rank(spec)
    c, raw = max_concurrence_batch(vals[None, :], rank)
    return float(c[0]), float(raw[0])


# -- concurrence -----------------------------------------------------------


def concurrence_batch(rho, u, spectra):
    """Wootters concurrence from the eigenvalues of sqrt(rho) rho~ sqrt(rho).

    ``u`` and ``spectra`` diagonalize ``rho`` (as produced by assembly), so
    the square root is spectral and needs no eigensolve.
    """
    root = np.sqrt(np.clip(spectra, 0.0, None))
    s = np.einsum("mij,mj,mkj->mik", u, root, np.conj(u))
    m = s @ spin_flip_batch(rho) @ s
    m = 0.5 * (m + np.conj(np.swapaxes(m, 1, 2)))
    ev = eigvalsh_batch(m)
    if np.any(ev < -CONCURRENCE_CLIP):
        raise NumericalConsistencyError("spin-flip product has a negative eigenvalue")
    eta = np.sqrt(np.clip(ev, 0.0, None))[:, ::-1]
    return np.maximum(0.0, eta[:, 0] - eta[:, 1] - eta[:, 2] - eta[:, 3])


def _state_parts(state):
    if state.unitary is not None:
        return state.unitary, state.spectrum
    from .statespace import hermitian_eigen

    w, v = hermitian_eigen(state.matrix, vectors=True)
    return v[:, ::-1], np.clip(w[::-1], 0.0, None)


def concurrence(state):
    if state.dims != (2, 2):
        raise ValueError("concurrence is implemented for two-qubit states")
    u, spec = _state_parts(state)
    rho = state.matrix.astype(np.complex128)
    return float(concurrence_batch(rho[None], u[None], spec[None])[0])


def concurrence_pair(state):
    c = concurrence(state)
    c_max, raw = maximal_concurrence(state)
    return ConcurrencePair(c, c_max, raw)


# -- PPT -------------------------------------------------------------------


def pt_min_eigenvalue(state):
    return float(eigvalsh_batch(partial_transpose(state)[None])[0, 0])


def negativity(state):
    return max(0.0, -2.0 * pt_min_eigenvalue(state))


def ppt_separable(state):
    return pt_min_eigenvalue(state) >= -PSD_TOL


# -- thresholds ------------------------------------------------------------


def rank3_quantities(spectra):
    """``(minor3, mineig3)`` from descending rank-3 spectra."""
    lam = np.asarray(spectra, dtype=float)
    return lam[:, 0] * lam[:, 1] * lam[:, 2], lam[:, 2]


def rank3_modified_quantities(state):
    vals, rank = _spec_and_rank(state)
    if rank != 3 or np.count_nonzero(vals) != 3:
        raise ValueError("rank-3 quantities need a spectrum with exactly three nonzero entries")
    minor3, mineig3 = rank3_quantities(vals[None, :])
    return float(minor3[0]), float(mineig3[0])


def _finish(t, entangled):
    t = np.where(entangled, np.minimum(t, BELOW_ONE), np.inf)
    return np.where(np.isnan(t), BELOW_ONE, t)


def det_thresholds(spectra, pt_eigs, rank):
    """Linear determinant mixing; rank 3 uses the product of nonzero eigenvalues."""
    lam = np.asarray(spectra, dtype=float)
    det_rho = rank3_quantities(lam)[0] if rank == 3 else np.prod(lam, axis=1)
    det_pt = np.prod(pt_eigs, axis=1)
    entangled = pt_eigs[:, 0] < -PSD_TOL
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(det_pt < 0.0, det_rho / (det_rho - det_pt), BELOW_ONE)
    return _finish(t, entangled)


def mineig_thresholds(spectra, pt_eigs, rank):
    lam = np.asarray(spectra, dtype=float)
    lmin = lam[:, rank - 1]
    lpt = pt_eigs[:, 0]
    entangled = lpt < -PSD_TOL
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(lpt < 0.0, lmin / (lmin - lpt), BELOW_ONE)
    return _finish(t, entangled)


# quartic coefficients (ascending powers) from values at alpha = 0, 1/4, .., 1
_NODES = np.linspace(0.0, 1.0, 5)
_VINV = np.linalg.inv(np.vander(_NODES, 5, increasing=True))


@_accel.njit
def _det_lu(a):
    n = a.shape[0]
    m = a.copy()
    det = 1.0 + 0j
    for k in range(n):
        piv = k
        best = abs(m[k, k])
        for i in range(k + 1, n):
            if abs(m[i, k]) > best:
                best = abs(m[i, k])
                piv = i
        if best == 0.0:
            return 0.0
        if piv != k:
            for j in range(n):
                tmp = m[k, j]
                m[k, j] = m[piv, j]
                m[piv, j] = tmp
            det = -det
        det *= m[k, k]
        for i in range(k + 1, n):
            f = m[i, k] / m[k, k]
            for j in range(k + 1, n):
                m[i, j] -= f * m[k, j]
    return det.real


@_accel.njit
def _horner(c, x):
    v = 0.0
    for i in range(c.shape[0] - 1, -1, -1):
        v = v * x + c[i]
    return v


@_accel.njit
def _bisect(c, lo, hi, flo):
    # flo is the sign-carrying value at lo; assumes a sign change on [lo, hi]
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = _horner(c, mid)
        if (fm < 0.0) == (flo < 0.0):
            lo = mid
            flo = fm
        else:
            hi = mid
    return lo, hi


@_accel.njit
def _first_down_crossing(c):
    """First alpha in (0, 1] where the quartic goes from >= 0 to < 0.

    Monotone pieces come from the roots of p' found by bisection between
    the closed-form roots of p''.  Returns (root or -1, number of
    down-crossings in (0, 1]).
    """
    d1 = np.array([c[1], 2.0 * c[2], 3.0 * c[3], 4.0 * c[4]])
    qa, qb, qc = 12.0 * c[4], 6.0 * c[3], 2.0 * c[2]
    cuts2 = [0.0]
    if qa != 0.0:
        disc = qb * qb - 4.0 * qa * qc
        if disc > 0.0:
            sq = np.sqrt(disc)
            r1 = (-qb - sq) / (2.0 * qa)
            r2 = (-qb + sq) / (2.0 * qa)
            if r1 > r2:
                r1, r2 = r2, r1
            if 0.0 < r1 < 1.0:
                cuts2.append(r1)
            if 0.0 < r2 < 1.0 and r2 != r1:
                cuts2.append(r2)
    elif qb != 0.0:
        r = -qc / qb
        if 0.0 < r < 1.0:
            cuts2.append(r)
    cuts2.append(1.0)
    cuts = [0.0]
    for i in range(len(cuts2) - 1):
        a, b = cuts2[i], cuts2[i + 1]
        fa, fb = _horner(d1, a), _horner(d1, b)
        if fa != 0.0 and fb != 0.0 and (fa < 0.0) != (fb < 0.0):
            lo, hi = _bisect(d1, a, b, fa)
            cuts.append(0.5 * (lo + hi))
    cuts.append(1.0)
    root = -1.0
    n_down = 0
    for i in range(len(cuts) - 1):
        a, b = cuts[i], cuts[i + 1]
        fa, fb = _horner(c, a), _horner(c, b)
        if fa >= 0.0 and fb < 0.0:
            n_down += 1
            if root < 0.0:
                lo, hi = _bisect(c, a, b, fa)
                root = lo
    return root, n_down


@_accel.njit
def _convdet_jit(rho, pt, p0, p1, vinv):
    m, n, _ = rho.shape
    t = np.empty(m)
    n_multi = 0
    vals = np.empty(5)
    coef = np.empty(5)
    for s in range(m):
        vals[0] = p0[s]
        vals[4] = p1[s]
        for k in range(1, 4):
            a = 0.25 * k
            vals[k] = _det_lu((1.0 - a) * rho[s] + a * pt[s])
        for i in range(5):
            acc = 0.0
            for j in range(5):
                acc += vinv[i, j] * vals[j]
            coef[i] = acc
        root, n_down = _first_down_crossing(coef)
        t[s] = root
        if n_down > 1:
            n_multi += 1
    return t, n_multi


def _convdet_np(rho, pt, p0, p1):
    m = rho.shape[0]
    vals = np.empty((m, 5))
    vals[:, 0] = p0
    vals[:, 4] = p1
    for k in range(1, 4):
        a = 0.25 * k
        vals[:, k] = np.linalg.det((1.0 - a) * rho + a * pt).real
    coef = vals @ _VINV.T
    crossing = getattr(_first_down_crossing, "py_func", _first_down_crossing)
    t = np.empty(m)
    n_multi = 0
    for s in range(m):
        t[s], n_down = crossing(coef[s])
        n_multi += n_down > 1
    return t, n_multi


def convdet_thresholds(rho, pt, spectra, pt_eigs):
    """Quartic-in-alpha determinant constraint.

    Returns ``(t, n_multi)``; ``n_multi`` counts states whose quartic has
    more than one down-crossing in (0, 1] (the first one is used).
    """
    entangled = pt_eigs[:, 0] < -PSD_TOL
    t = np.full(rho.shape[0], np.inf)
    if not entangled.any():
        return t, 0
    idx = np.flatnonzero(entangled)
    r = np.ascontiguousarray(rho[idx])
    p = np.ascontiguousarray(pt[idx])
    p0 = np.prod(np.asarray(spectra, dtype=float)[idx], axis=1)
    p1 = np.prod(pt_eigs[idx], axis=1)
    if _accel.use_jit():
        ts, n_multi = _convdet_jit(r, p, p0, p1, _VINV)
    else:
        ts, n_multi = _convdet_np(r, p, p0, p1)
    t[idx] = np.where(ts < 0.0, BELOW_ONE, np.minimum(ts, BELOW_ONE))
    return t, int(n_multi)


def _mineig_at(rho, pt, alpha):
    mats = rho + alpha[:, None, None] * (pt - rho)
    return eigvalsh_batch(mats)[:, 0]


def convmineig_bounds(rho, pt, grid):
    """Feasible grid-index interval ``[lo, hi]`` per state (inclusive).

    ``lmin(rho + alpha (rho_PT - rho))`` is concave in alpha and nonnegative
    at 0, so the feasible set is an interval containing 0 and each side can
    be located by binary search over grid indices.  Empty masks give
    ``lo > hi``.
    """
    grid = np.asarray(grid, dtype=float)
    m = rho.shape[0]
    g = grid.size
    zero = int(np.searchsorted(grid, 0.0, side="left"))
    # right side: largest feasible index in [zero, g-1]
    lo_r = np.full(m, zero - 1)
    hi_r = np.full(m, g)
    # left side: smallest feasible index in [0, zero-1]
    lo_l = np.full(m, -1)
    hi_l = np.full(m, zero)
    while True:
        act_r = hi_r - lo_r > 1
        act_l = hi_l - lo_l > 1
        if not (act_r.any() or act_l.any()):
            break
        mid_r = (lo_r + hi_r) // 2
        mid_l = (lo_l + hi_l) // 2
        sel_r = np.flatnonzero(act_r)
        sel_l = np.flatnonzero(act_l)
        sel = np.concatenate([sel_r, sel_l])
        alpha = np.concatenate([grid[mid_r[sel_r]], grid[mid_l[sel_l]]])
        feas = _mineig_at(rho[sel], pt[sel], alpha) >= -PSD_TOL
        fr, fl = feas[: sel_r.size], feas[sel_r.size :]
        lo_r[sel_r] = np.where(fr, mid_r[sel_r], lo_r[sel_r])
        hi_r[sel_r] = np.where(fr, hi_r[sel_r], mid_r[sel_r])
        hi_l[sel_l] = np.where(fl, mid_l[sel_l], hi_l[sel_l])
        lo_l[sel_l] = np.where(fl, lo_l[sel_l], mid_l[sel_l])
    lo = hi_l
    hi = lo_r
    # a left side that is fully feasible joins the right run at `zero`
    return lo, hi


def convmineig_masks_bruteforce(rho, pt, grid):
    """Direct scan of every grid point (reference for the binary search)."""
    grid = np.asarray(grid, dtype=float)
    m = rho.shape[0]
    out = np.empty((m, grid.size), dtype=bool)
    for i, a in enumerate(grid):
        out[:, i] = _mineig_at(rho, pt, np.full(m, a)) >= -PSD_TOL
    return out


def concurrence_thresholds(c, c_max):
    c = np.asarray(c, dtype=float)
    c_max = np.asarray(c_max, dtype=float)
    if np.any(c > c_max + CONCURRENCE_SLACK):
        raise NumericalConsistencyError("concurrence exceeds maximal concurrence")
    cm = np.maximum(c_max, c)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(c > 0.0, cm / (c + cm), np.inf)
    return t


# -- single-state wrappers -------------------------------------------------


def _single(state):
    rho = state.matrix.astype(np.complex128)[None]
    pt = partial_transpose_batch(rho, state.dims)
    pt_eigs = eigvalsh_batch(pt)
    return rho, pt, state.spectrum[None, :], pt_eigs


def alpha_set_det(state):
    if state.dims != (2, 2):
        raise ValueError("determinant constraint needs a two-qubit state")
    _, _, spec, pt_eigs = _single(state)
    return FeasibleAlphaSet.from_threshold(det_thresholds(spec, pt_eigs, state.rank_target)[0])


def alpha_set_mineig(state):
    _, _, spec, pt_eigs = _single(state)
    return FeasibleAlphaSet.from_threshold(mineig_thresholds(spec, pt_eigs, state.rank_target)[0])


def alpha_set_convdet(state):
    if state.dims != (2, 2):
        raise ValueError("determinant constraint needs a two-qubit state")
    rho, pt, spec, pt_eigs = _single(state)
    t, _ = convdet_thresholds(rho, pt, spec, pt_eigs)
    return FeasibleAlphaSet.from_threshold(t[0])


def alpha_grid_convmineig(state, grid):
    grid = np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly ascending")
    rho, pt, _, _ = _single(state)
    lo, hi = convmineig_bounds(rho, pt, grid)
    idx = np.arange(grid.size)
    return FeasibleAlphaSet("grid_mask", mask=(idx >= lo[0]) & (idx <= hi[0]), grid=grid)


def alpha_set_concurrence(state):
    pair = concurrence_pair(state)
    return FeasibleAlphaSet.from_threshold(concurrence_thresholds([pair.c], [pair.c_max])[0])
