"""Integral identities over the two-qubit simplex, checked by cubature.

Two families:

* diagonal-entry forms: a polynomial in ``D_1..D_4`` and
  ``nu = D_1 D_4 / (D_2 D_3)`` integrated over the simplex where
  ``nu <= 1``;
* eigenvalue forms: ``sigma(C_max(lambda))`` times an eigenvalue density
  integrated over the ordered chamber ``l1 >= l2 >= l3 >= l4``.

The Bures eigenvalue form has ``l_i^(-1/2)`` on every face, which the
simplex rule cannot resolve.  It is integrated over the whole simplex in
collapsed coordinates ``l1 = t1, l2 = (1-t1) t2, ...`` with ``t = sin^2``,
which turns every face singularity into a smooth factor, by tensor
Gauss-Legendre; the integrand is symmetric once ``l`` is sorted, so the
chamber integral is the simplex integral over ``4!``.

For the diagonal-entry forms the curved region ``nu <= 1`` is handled
exactly: with ``D_1 = a^2`` and ``D_4 = b^2`` the condition reads
``D_2 D_3 >= a^2 b^2`` on the segment ``D_2 + D_3 = s = 1 - a^2 - b^2``,
i.e. ``D_2`` in ``[(s - L)/2, (s + L)/2]`` with
``L^2 = (1 - (a+b)^2)(1 - (a-b)^2)``.  The inner integral is polynomial in
``D_2`` (Gauss-Legendre, exact) and the outer one runs over the triangle
``a, b >= 0, a + b <= 1`` with the adaptive simplex rule.
"""

from dataclasses import dataclass

import numpy as np

from .constants import constant
from .cubature import integrate_simplex

IDENTITIES = ("desfconj", "desfconjreal", "esfconj", "esfconjreal", "esfconjBures")

_TARGET = {
    "desfconj": "hs_sep_complex",
    "desfconjreal": "hs_sep_real",
    "esfconj": "hs_sep_complex",
    "esfconjreal": "hs_sep_real",
    "esfconjBures": "bures_sep_complex",
}
_NORMALIZER = {k: f"{k}_normalizer" for k in IDENTITIES}

CHAMBER = np.array([[1.0, 0.0, 0.0], [0.5, 0.5, 0.0], [1 / 3, 1 / 3, 1 / 3], [0.25, 0.25, 0.25]])
_AB_TRIANGLE = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
_INNER_T, _INNER_W = np.polynomial.legendre.leggauss(8)


@dataclass(frozen=True)
class IdentityReport:
    id: str
    rhs: float
    target: float
    deviation: float
    error_estimate: float
    converged: bool
    evaluations: int

    def passed(self, tolerance):
        return abs(self.deviation) <= tolerance


def nu_ratio(d):
    """``nu = D_1 D_4 / (D_2 D_3)`` for rows ``(D_1, D_2, D_3[, D_4])``."""
    d = np.atleast_2d(np.asarray(d, dtype=float))
    d4 = d[:, 3] if d.shape[1] == 4 else 1.0 - d.sum(axis=1)
    return d[:, 0] * d4 / (d[:, 1] * d[:, 2])


def desf_integrand(kind, d1, d2, d3, d4):
    """Integrand of the diagonal-entry forms (before the ``nu <= 1`` cut)."""
    prod = d1 * d2 * d3 * d4
    nu = d1 * d4 / (d2 * d3)
    if kind == "desfconj":
        return prod**3 * (3.0 - nu) ** 2 * nu
    if kind == "desfconjreal":
        return prod**1.5 * (3.0 - nu) * np.sqrt(nu)
    raise ValueError(kind)


def _desf_reduced(kind, ab):
    a, b = ab[:, 0], ab[:, 1]
    s = 1.0 - a * a - b * b
    q = a * a * b * b
    ell = np.sqrt(np.clip((1.0 - (a + b) ** 2) * (1.0 - (a - b) ** 2), 0.0, None))
    d2 = 0.5 * s[:, None] + 0.5 * ell[:, None] * _INNER_T
    d3 = s[:, None] - d2
    # (D1 D2 D3 D4)^k (3 - nu)^m nu^j with nu = q / (D2 D3) collapses to a
    # polynomial in D2 D3 for both forms
    p = d2 * d3
    if kind == "desfconj":
        f = q[:, None] ** 4 * (3.0 * p - q[:, None]) ** 2
    else:
        f = q[:, None] ** 2 * (3.0 * p - q[:, None])
    # dD1 dD4 = 4ab da db, dD2 = (L/2) dt
    return (f @ _INNER_W) * 4.0 * a * b * 0.5 * ell


def cmax_rank4(lam):
    """Maximal concurrence ``max(0, l1 - l3 - 2 sqrt(l2 l4))`` for sorted rows."""
    lam = np.asarray(lam, dtype=float)
    return np.maximum(0.0, lam[:, 0] - lam[:, 2] - 2.0 * np.sqrt(np.clip(lam[:, 1] * lam[:, 3], 0.0, None)))


def _apply_sigma(sigma, c):
    out = sigma(c)
    out = np.asarray(out, dtype=float)
    if out.shape != c.shape:
        out = np.broadcast_to(out, c.shape) if out.ndim == 0 else np.array([float(sigma(x)) for x in c])
    return out


def _esf_integrand(kind, sigma, pts):
    lam = np.column_stack([pts, 1.0 - pts.sum(axis=1)])
    i, j = np.triu_indices(4, 1)
    gaps = lam[:, i] - lam[:, j]
    s = _apply_sigma(sigma, cmax_rank4(lam))
    if kind == "esfconj":
        return s * np.prod(gaps**2, axis=1)
    if kind == "esfconjreal":
        return s * np.prod(gaps, axis=1)
    # Bures form
    prod = np.prod(lam, axis=1)
    safe = np.where(prod > 0.0, prod, 1.0)
    body = np.prod(gaps**2 / (lam[:, i] + lam[:, j]), axis=1) / np.sqrt(safe)
    return np.where(prod > 0.0, s * body, 0.0)


def _bures_collapsed(sigma, n):
    x, w = np.polynomial.legendre.leggauss(n)
    th = (x + 1.0) * np.pi / 4.0
    t, ct = np.sin(th) ** 2, np.cos(th)
    wt = w * np.pi / 4.0
    t1, t2, t3 = (a.ravel() for a in np.meshgrid(t, t, t, indexing="ij"))
    c1, c2 = (a.ravel() for a in np.meshgrid(ct, ct, ct, indexing="ij")[:2])
    wts = np.einsum("i,j,k->ijk", wt, wt, wt).ravel()
    lam = np.column_stack([t1, (1 - t1) * t2, (1 - t1) * (1 - t2) * t3, (1 - t1) * (1 - t2) * (1 - t3)])
    lam = -np.sort(-lam, axis=1)
    i, j = np.triu_indices(4, 1)
    body = np.prod((lam[:, i] - lam[:, j]) ** 2 / (lam[:, i] + lam[:, j]), axis=1)
    s = _apply_sigma(sigma, cmax_rank4(lam))
    # prod l^(-1/2) times the collapse Jacobian (1-t1)^2 (1-t2), per axis
    # with dt = 2 sin cos dtheta: 2 cos^2, 2 cos and 2
    jac = 8.0 * c1**2 * c2
    return float(np.sum(wts * s * body * jac)) / 24.0


def verify_identity(id_, sigma=None, tolerance=1e-6, max_simplices=50_000, prefactor=None):
    """Evaluate the right-hand side of an identity and compare with its target.

    Args:
        id_: One of :data:`IDENTITIES`.
        sigma: Separability function of ``C_max``; required for the
            eigenvalue forms, ignored by the diagonal-entry forms.
        tolerance: Target absolute accuracy of the right-hand side.
        prefactor: Override the registry prefactor of the identity (for
            instance ``bures_chamber_normalizer``).

    Returns:
        An :class:`IdentityReport`.  A cubature that does not reach the
        tolerance is reported with ``converged=False``, not raised.
    """
    if id_ not in IDENTITIES:
        raise ValueError(f"unknown identity {id_!r}; valid: {', '.join(IDENTITIES)}")
    k = constant(_NORMALIZER[id_]).float_value if prefactor is None else float(prefactor)
    target = constant(_TARGET[id_]).float_value
    raw_tol = 0.1 * tolerance / k
    if id_ == "esfconjBures":
        if sigma is None:
            raise ValueError(f"{id_} needs a separability function sigma")
        n, prev = 40, _bures_collapsed(sigma, 20)
        while True:
            val = _bures_collapsed(sigma, n)
            err = abs(val - prev)
            if err <= raw_tol or n >= 320:
                break
            n, prev = 2 * n, val
        rhs = k * val
        return IdentityReport(id_, rhs, target, rhs - target, k * err, err <= raw_tol, n**3)
    if id_.startswith("desf"):
        res = integrate_simplex(lambda ab: _desf_reduced(id_, ab), _AB_TRIANGLE, tol=raw_tol,
                                max_simplices=max_simplices)
    else:
        if sigma is None:
            raise ValueError(f"{id_} needs a separability function sigma")
        res = integrate_simplex(lambda p: _esf_integrand(id_, sigma, p), CHAMBER, tol=raw_tol,
                                max_simplices=max_simplices)
    rhs = k * res.value
    return IdentityReport(id_, rhs, target, rhs - target, k * res.error, res.converged, res.evaluations)
