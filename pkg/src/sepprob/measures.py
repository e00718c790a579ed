"""Unnormalized eigenvalue densities used as importance weights.

Hilbert-Schmidt measures carry ``prod_{i<j} (l_i - l_j)^beta``; monotone
metrics (Bures, Wigner-Yanase, Kubo-Mori) carry
``prod_i l_i^(-1/2) prod_{i<j} [(l_i - l_j)^2 c(l_i, l_j)]^(beta/2)`` with
``c`` the metric's Morozova-Chentsov function.  Everything is computed in log
space; callers exponentiate after subtracting a running maximum.
"""

from dataclasses import dataclass

import numpy as np

from .statespace import Spectrum

EIGEN_FLOOR = 1e-12

METRICS = ("hs", "bures", "wy", "km")
MONOTONE = ("bures", "wy", "km")

# documentation only: c(x, y) and the operator monotone f(t) of each metric
CM_FORMULA = {
    "bures": ("2/(x+y)", "(1+t)/2"),
    "wy": ("4/(sqrt(x)+sqrt(y))^2", "(t+2 sqrt(t)+1)/4"),
    "km": ("(log x - log y)/(x-y)", "(t-1)/log t"),
}


class RejectedSample(ValueError):
    """Spectrum outside the domain where the weight is evaluated."""


@dataclass(frozen=True)
class MetricId:
    name: str
    beta: int

    def __post_init__(self):
        if self.name not in METRICS:
            raise ValueError(f"unknown metric {self.name!r}")
        allowed = (1, 2, 4) if self.name == "hs" else (1, 2)
        if self.beta not in allowed:
            raise ValueError(f"{self.name} is defined for beta in {allowed}")

    @property
    def cm_formula(self):
        return CM_FORMULA.get(self.name, (None, None))[0]

    @property
    def operator_monotone(self):
        return CM_FORMULA.get(self.name, (None, None))[1]


@dataclass(frozen=True)
class MeasureWeight:
    log_value: float

    @property
    def value(self):
        return float(np.exp(self.log_value))


def log_cm(metric, x, y):
    """log c(x, y), elementwise, for positive arrays."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if metric == "bures":
        return np.log(2.0) - np.log(x + y)
    if metric == "wy":
        return np.log(4.0) - 2.0 * np.log(np.sqrt(x) + np.sqrt(y))
    if metric == "km":
        # log(x/y)/(x-y) via log1p keeps full precision as x -> y
        r = (x - y) / y
        safe = np.where(r == 0.0, 1.0, r)
        ratio = np.where(r == 0.0, 1.0, np.log1p(safe) / safe)
        return np.log(ratio) - np.log(y)
    raise ValueError(f"no Morozova-Chentsov function for {metric!r}")


def cm_function(metric, x, y):
    if not (x > 0 and y > 0):
        raise ValueError("Morozova-Chentsov functions need positive arguments")
    return float(np.exp(log_cm(metric, x, y)))


def _pair_indices(k):
    return np.triu_indices(k, 1)


def log_hs_weights(spectra, beta, n_levels, rank):
    """Batched log HS weight over the first ``rank`` eigenvalues.

    Rank-deficient spectra pick up ``prod_{i<=k} l_i^(beta (N-k))``.
    Coincident eigenvalues give ``-inf``.
    """
    lam = np.asarray(spectra, dtype=float)[:, :rank]
    i, j = _pair_indices(rank)
    with np.errstate(divide="ignore"):
        out = beta * np.sum(np.log(lam[:, i] - lam[:, j]), axis=1)
        if rank < n_levels:
            out = out + beta * (n_levels - rank) * np.sum(np.log(lam), axis=1)
    return out


def log_monotone_weights(spectra, metric, beta):
    """Batched log monotone-metric weight for full-rank spectra.

    Returns ``(log_w, ok)``; ``ok`` is False where the smallest eigenvalue is
    below ``EIGEN_FLOOR`` (those samples are rejected, not weighted).
    """
    lam = np.asarray(spectra, dtype=float)
    ok = lam.min(axis=1) >= EIGEN_FLOOR
    safe = np.where(ok[:, None], lam, 1.0 / lam.shape[1])
    i, j = _pair_indices(lam.shape[1])
    x, y = safe[:, i], safe[:, j]
    with np.errstate(divide="ignore"):
        pair = 2.0 * np.log(np.abs(x - y)) + log_cm(metric, x, y)
    out = -0.5 * np.sum(np.log(safe), axis=1) + 0.5 * beta * np.sum(pair, axis=1)
    return np.where(ok, out, -np.inf), ok


def log_weights(spectra, metric, n_levels, rank):
    """Dispatch on a :class:`MetricId`; returns ``(log_w, ok)``."""
    if metric.name == "hs":
        lw = log_hs_weights(spectra, metric.beta, n_levels, rank)
        return lw, np.ones(lw.shape, dtype=bool)
    if rank != n_levels:
        raise ValueError("monotone metrics are defined for full-rank spectra only")
    return log_monotone_weights(spectra, metric.name, metric.beta)


def _values(spec):
    if isinstance(spec, Spectrum):
        return spec.values, spec.rank
    v = np.asarray(spec, dtype=float)
    return v, int(np.count_nonzero(v))


def hs_weight(spec, beta, n_levels=None):
    vals, rank = _values(spec)
    n_levels = vals.size if n_levels is None else n_levels
    return MeasureWeight(float(log_hs_weights(vals[None, :], beta, n_levels, rank)[0]))


def monotone_weight(spec, metric, beta):
    vals, rank = _values(spec)
    MetricId(metric, beta)
    if rank != vals.size:
        raise ValueError("monotone metrics are defined for full-rank spectra only")
    lw, ok = log_monotone_weights(vals[None, :], metric, beta)
    if not ok[0]:
        raise RejectedSample(f"smallest eigenvalue below {EIGEN_FLOOR}")
    return MeasureWeight(float(lw[0]))
