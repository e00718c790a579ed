"""Grundmann-Moller simplex rules with adaptive longest-edge bisection.

The rule of degree ``2s + 1`` on an n-simplex integrates polynomials of that
degree exactly; the difference between consecutive orders is the error
indicator used to pick which simplex to split next.
"""

import heapq
from dataclasses import dataclass
from functools import lru_cache
from math import factorial

import numpy as np


@lru_cache(maxsize=None)
def _compositions(total, parts):
    if parts == 1:
        return ((total,),)
    out = []
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            out.append((first,) + rest)
    return tuple(out)


@lru_cache(maxsize=None)
def gm_rule(n, s):
    """Barycentric nodes and weights (summing to 1) of the degree-(2s+1) rule.

    Weights are normalized to the simplex volume, so the integral is
    ``volume * sum(w * f(nodes))``.
    """
    d = 2 * s + 1
    nodes, weights = [], []
    for i in range(s + 1):
        denom = d + n - 2 * i
        coef = (-1) ** i * 2.0 ** (-2 * s) * denom**d / (factorial(i) * factorial(d + n - i))
        coef *= factorial(n)
        for beta in _compositions(s - i, n + 1):
            nodes.append([(2 * b + 1) / denom for b in beta])
            weights.append(coef)
    nodes = np.array(nodes)
    weights = np.array(weights)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def simplex_volume(vertices):
    v = np.asarray(vertices, dtype=float)
    n = v.shape[0] - 1
    return abs(np.linalg.det(v[1:] - v[0])) / factorial(n)


@dataclass(frozen=True)
class CubatureResult:
    value: float
    error: float
    evaluations: int
    simplices: int
    converged: bool


def _estimate(f, simplices, s):
    """Degree 2s+1 and 2s-1 estimates for a stack of simplices (m, n+1, n)."""
    m, nv, n = simplices.shape
    hi_nodes, hi_w = gm_rule(n, s)
    lo_nodes, lo_w = gm_rule(n, s - 1)
    vol = np.abs(np.linalg.det(simplices[:, 1:] - simplices[:, :1])) / factorial(n)
    pts_hi = np.einsum("kv,mvd->mkd", hi_nodes, simplices)
    pts_lo = np.einsum("kv,mvd->mkd", lo_nodes, simplices)
    f_hi = np.asarray(f(pts_hi.reshape(-1, n)), dtype=float).reshape(m, -1)
    f_lo = np.asarray(f(pts_lo.reshape(-1, n)), dtype=float).reshape(m, -1)
    q_hi = vol * (f_hi @ hi_w)
    q_lo = vol * (f_lo @ lo_w)
    return q_hi, np.abs(q_hi - q_lo), m * (len(hi_w) + len(lo_w))


def _bisect(simplex):
    n1 = simplex.shape[0]
    best, pair = -1.0, (0, 1)
    for a in range(n1):
        for b in range(a + 1, n1):
            d = np.sum((simplex[a] - simplex[b]) ** 2)
            if d > best:
                best, pair = d, (a, b)
    a, b = pair
    mid = 0.5 * (simplex[a] + simplex[b])
    left = simplex.copy()
    right = simplex.copy()
    left[b] = mid
    right[a] = mid
    return left, right


def integrate_simplex(f, vertices, tol=1e-10, s=4, max_simplices=200_000, batch=64, levels=6):
    """Adaptive integral of ``f`` over a simplex.

    Args:
        f: Vectorized integrand, ``(m, n) -> (m,)``.
        vertices: ``(n+1, n)`` vertex array, or a list of such arrays for a
            union of simplices.
        tol: Absolute tolerance on the summed error indicator.
        s: Rule order; degree ``2s+1``.
        levels: Uniform bisection rounds before adapting; the two-rule error
            indicator can vanish by accident on a single coarse simplex.
    """
    verts = np.asarray(vertices, dtype=float)
    if verts.ndim == 2:
        verts = verts[None]
    for _ in range(levels):
        verts = np.array([half for simplex in verts for half in _bisect(simplex)])
    q, e, evals = _estimate(f, verts, s)
    heap = [(-err, k) for k, err in enumerate(e)]
    heapq.heapify(heap)
    store = {k: (verts[k], q[k], e[k]) for k in range(len(q))}
    total, err_total = float(np.sum(q)), float(np.sum(e))
    next_id = len(q)
    while err_total > tol and len(store) < max_simplices:
        take = [heapq.heappop(heap)[1] for _ in range(min(batch, len(heap)))]
        children = []
        for k in take:
            simplex, qk, ek = store.pop(k)
            total -= qk
            err_total -= ek
            children.extend(_bisect(simplex))
        children = np.array(children)
        qc, ec, ne = _estimate(f, children, s)
        evals += ne
        for j in range(len(qc)):
            store[next_id] = (children[j], qc[j], ec[j])
            heapq.heappush(heap, (-ec[j], next_id))
            next_id += 1
        total += float(np.sum(qc))
        err_total += float(np.sum(ec))
        # resum occasionally so running updates do not drift
        if next_id % 4096 < 2 * batch:
            total = float(sum(v[1] for v in store.values()))
            err_total = float(sum(v[2] for v in store.values()))
    total = float(sum(v[1] for v in store.values()))
    err_total = float(sum(v[2] for v in store.values()))
    return CubatureResult(total, err_total, evals, len(store), err_total <= tol)
