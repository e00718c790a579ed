"""Closed-form densities, fit curves and model separability functions."""

from dataclasses import dataclass
from fractions import Fraction
from math import sqrt

import numpy as np

from .constants import constant


class UnsupportedBranch(ValueError):
    """Requested branch has no closed form in the registry."""


class OutOfDomain(ValueError):
    pass


# -- rank-3 marginal of C = l1 - l3 -----------------------------------------


def _marg_real(c):
    if c <= 0.5:
        return -1792.0 / 81.0 * c**4 * (12.0 * c * c - 5.0)
    return 3584.0 / 81.0 * (c - 1.0) ** 4 * c * (4.0 * c * (5.0 * c - 1.0) - 1.0)


def _marg_complex(c):
    if c <= 0.5:
        c2 = c * c
        return 7280.0 / 729.0 * c**7 * (155.0 * c2**3 + 1287.0 * c2**2 - 1089.0 * c2 + 231.0)
    inner = c * (c * (c * (16325.0 * c - 7693.0) - 379.0) + 315.0) + 45.0
    return -7280.0 / 729.0 * (c - 1.0) ** 7 * c * c * inner


def _marg_quat_lower(c):
    c2 = c * c
    poly = 7133.0 * c2**5 + 236790.0 * c2**4 + 253023.0 * c2**3 - 729980.0 * c2**2 + 497097.0 * c2 - 142766.0
    return 9209200.0 * c**13 * (3.0 * poly * c2 + 46189.0) / 531441.0


def marg_rank3(c, beta):
    """Marginal density of ``C = l1 - l3`` for rank-3 two-qubit HS states.

    Piecewise polynomial with the branch switch at ``C = 1/2`` (the left
    branch owns ``C = 1/2``).  The quaternionic upper branch is not available.

    Raises:
        OutOfDomain: ``C`` outside (0, 1).
        UnsupportedBranch: ``beta = 4`` with ``C > 1/2``.
    """
    c = float(c)
    if not 0.0 < c < 1.0:
        raise OutOfDomain("C must lie in (0, 1)")
    if beta == 1:
        return _marg_real(c)
    if beta == 2:
        return _marg_complex(c)
    if beta == 4:
        if c > 0.5:
            raise UnsupportedBranch("quaternionic marginal has no closed form for C > 1/2")
        return _marg_quat_lower(c)
    raise ValueError("beta must be 1, 2 or 4")


_GL_NODES = 24


def _gl(a, b, n=_GL_NODES):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


def _marg_rank3_unnormalized(c, beta):
    """Integral of the rank-3 eigenvalue density over the fibre ``l1 - l3 = c``.

    On the fibre ``l3 = (1 - c - l2)/2`` and ``l1 = l3 + c`` with
    ``l2`` in ``[(1-c)/3, min((1+c)/3, 1-c)]``; the integrand is a polynomial
    in ``l2``, so Gauss-Legendre is exact up to rounding.
    """
    lo = (1.0 - c) / 3.0
    hi = min((1.0 + c) / 3.0, 1.0 - c)
    if hi <= lo:
        return 0.0
    l2, w = _gl(lo, hi)
    l3 = 0.5 * (1.0 - c - l2)
    l1 = l3 + c
    gaps = (l1 - l2) * (l1 - l3) * (l2 - l3)
    dens = (gaps * l1 * l2 * l3) ** beta
    return 0.5 * float(np.dot(w, dens))


def _piecewise_moment(f, k):
    """``int_0^1 C^k f(C) dC`` with a Gauss-Legendre rule on each half."""
    total = 0.0
    for a, b in ((0.0, 0.5), (0.5, 1.0)):
        x, w = _gl(a, b, 40)
        total += float(np.dot(w, [xi**k * f(xi) for xi in x]))
    return total


_NORM_CACHE = {}


def marg_rank3_numeric(c, beta):
    """Normalized rank-3 marginal computed straight from the eigenvalue measure.

    Covers every branch (including the quaternionic upper one) and serves as
    an independent check on :func:`marg_rank3`.
    """
    if not 0.0 < c < 1.0:
        raise OutOfDomain("C must lie in (0, 1)")
    if beta not in _NORM_CACHE:
        _NORM_CACHE[beta] = _piecewise_moment(lambda x: _marg_rank3_unnormalized(x, beta), 0)
    return _marg_rank3_unnormalized(float(c), beta) / _NORM_CACHE[beta]


def _best_marginal(beta):
    """Closed form where available, numeric oracle on the missing branch."""
    if beta == 4:
        return lambda c: _marg_quat_lower(c) if c <= 0.5 else marg_rank3_numeric(c, 4)
    return lambda c: marg_rank3(c, beta)


@dataclass(frozen=True)
class MarginalMoments:
    mass: float
    mean: float
    variance: float
    lower_mass: float

    @property
    def upper_mass(self):
        return self.mass - self.lower_mass


def rank3_moments(beta):
    """Total mass, mean, variance and lower-half mass of the rank-3 marginal."""
    f = _best_marginal(beta)
    m0 = _piecewise_moment(f, 0)
    m1 = _piecewise_moment(f, 1)
    m2 = _piecewise_moment(f, 2)
    x, w = _gl(0.0, 0.5, 40)
    lower = float(np.dot(w, [f(xi) for xi in x]))
    return MarginalMoments(m0, m1 / m0, m2 / m0 - (m1 / m0) ** 2, lower)


# -- beta-distribution fits --------------------------------------------------

_BETA_FIT_IDS = {1: "real", 2: "complex", 4: "quat"}
BETA_FIT_RTOL = 1e-9


class BetaFitMismatch(AssertionError):
    pass


def _fraction(const_id):
    expr = constant(const_id).exact_expression
    return Fraction(expr.left.value) / Fraction(expr.right.value)


def beta_fit_params(beta):
    """Stored ``(p, q)`` of the beta-distribution fit, as exact fractions.

    The pair is re-derived by moment matching the marginal's mean and
    variance; disagreement beyond ``BETA_FIT_RTOL`` raises.
    """
    if beta not in _BETA_FIT_IDS:
        raise ValueError("beta must be 1, 2 or 4")
    tag = _BETA_FIT_IDS[beta]
    p = _fraction(f"beta_fit_p_{tag}")
    q = _fraction(f"beta_fit_q_{tag}")
    mp, mq = moment_matched_beta(beta)
    if abs(mp - float(p)) > BETA_FIT_RTOL * float(p) or abs(mq - float(q)) > BETA_FIT_RTOL * float(q):
        raise BetaFitMismatch(f"moment matching gives ({mp}, {mq}), stored ({float(p)}, {float(q)})")
    return p, q


def moment_matched_beta(beta):
    m = rank3_moments(beta)
    k = m.mean * (1.0 - m.mean) / m.variance - 1.0
    return m.mean * k, (1.0 - m.mean) * k


# -- alpha-curve fits ----------------------------------------------------------

_SQRT2398 = sqrt(2398.0)


def _complex_fit(a):
    c = constant("complex_fit_c").float_value
    return (c / (c + 25.0 * sqrt(a))) ** 2


def _bures_printed(a):
    r = a ** (1.0 / 7.0)
    den = 4.0 * sqrt(105.0 * (sqrt(2.0) - 1.0)) * (r - 1.0) + np.pi**4 * r
    return 1680.0 * (1.0 - sqrt(2.0)) / den**2


FIT_CURVES = {
    "real_hs": lambda a: 8.0 / (8.0 + 9.0 * sqrt(a)),
    "complex_hs": _complex_fit,
    "real_linear": lambda a: 1.0 - 9.0 * a / 17.0,
    # as printed the numerator is 1680(1 - sqrt 2) < 0; the sign-flipped form
    # runs from 1 at alpha = 0 to the silver-mean value at alpha = 1
    "bures_printed": _bures_printed,
    "bures": lambda a: -_bures_printed(a),
    "qq_complex_sqrt": lambda a: 64.0 / ((_SQRT2398 - 8.0) * sqrt(a) + 8.0) ** 2,
    "qq_complex_linear": lambda a: 64.0 / ((_SQRT2398 - 8.0) * a + 8.0) ** 2,
}
FIT_ALIASES = {"fitReal": "real_hs", "complex": "complex_hs", "conjBures": "bures_printed"}


def fit_curve(name, alpha):
    key = FIT_ALIASES.get(name, name)
    if key not in FIT_CURVES:
        raise ValueError(f"unknown fit curve {name!r}; valid: {', '.join(sorted(FIT_CURVES))}")
    alpha = float(alpha)
    if not 0.0 <= alpha <= 1.0:
        raise OutOfDomain("alpha must lie in [0, 1]")
    return FIT_CURVES[key](alpha)


# -- model separability functions --------------------------------------------


@dataclass(frozen=True)
class DysonModel:
    """A model separability function.

    ``rank`` is one of ``rank4``, ``rank3``, ``rank6`` (half-range power
    laws), ``rank4_pattern`` or ``rank3_pattern`` (lower-half patterns).
    ``norm`` multiplies the power law; ``None`` means the normalization is
    unknown and only unnormalized values can be requested.
    """

    rank: str
    beta: int
    norm: float = None


def _half_norm(beta):
    if beta == 1:
        return constant("dyson_norm_real").float_value
    if beta == 2:
        return constant("dyson_norm_complex").float_value
    return None


def dyson_model(rank, beta):
    """Model with the registry's normalization filled in where one exists."""
    if rank == "rank4":
        return DysonModel(rank, beta, _half_norm(beta))
    if rank in ("rank6", "rank4_pattern", "rank3_pattern"):
        return DysonModel(rank, beta, 1.0)
    return DysonModel(rank, beta, None)


# exponent of (2 - 2C) on [1/2, 1]
_HALF_EXPONENT = {("rank4", 1): 1.5, ("rank4", 2): 3.0, ("rank4", 4): 6.0,
                  ("rank3", 1): 1.75, ("rank3", 2): 3.5}
_DOMAINS = {"rank4": (0.5, 1.0), "rank3": (0.5, 1.0), "rank6": (1.0 / 3.0, 1.0),
            "rank4_pattern": (0.0, 0.5), "rank3_pattern": (0.0, 0.5)}
SIGMA1_LINEAR_SLOPE = 1.75


def dyson_sigma(model, c, normalized=True, sigma1=None):
    """Evaluate a model separability function at ``C``.

    Args:
        model: A :class:`DysonModel`.
        c: Maximal concurrence in the model's domain.
        normalized: Apply ``model.norm``; must be False when the norm is
            unknown (quaternionic half-range model).
        sigma1: Real separability function used by the pattern models; the
            rank-4 pattern defaults to the linear approximation
            ``1 - 1.75 C``.
    """
    if model.rank not in _DOMAINS:
        raise ValueError(f"unknown model {model.rank!r}")
    lo, hi = _DOMAINS[model.rank]
    c = float(c)
    open_left = model.rank.endswith("pattern")
    if c > hi or c < lo or (open_left and c == lo):
        raise OutOfDomain(f"C = {c} outside the {model.rank} domain")
    if model.rank in ("rank4", "rank3"):
        key = (model.rank, model.beta)
        if key not in _HALF_EXPONENT:
            raise ValueError(f"no {model.rank} model for beta = {model.beta}")
        value = (2.0 - 2.0 * c) ** _HALF_EXPONENT[key]
    elif model.rank == "rank6":
        value = (4.0 / 3.0 - c) ** 7
    else:
        slope = 2.0 if model.rank == "rank4_pattern" else 3.0
        if sigma1 is None:
            if model.rank == "rank3_pattern":
                raise ValueError("the rank-3 pattern needs the real separability function")
            s1 = 1.0 - SIGMA1_LINEAR_SLOPE * c
        else:
            s1 = float(sigma1(c))
        if model.beta == 1:
            return s1
        value = (sqrt(1.0 + slope * c) * s1) ** 2
    if not normalized:
        return value
    if model.norm is None:
        raise ValueError("model normalization is unknown; request normalized=False")
    return model.norm * value


def sbz_check(p_rank4, p_rank3, p_abs):
    """Residual ``p4/p3 - (2 - p_abs/p3)`` of the rank-4 / rank-3 relation."""
    return p_rank4 / p_rank3 - (2.0 - p_abs / p_rank3)


def sbz_check_se(p_rank4, se4, p_rank3, se3, p_abs, se_abs):
    """Residual and its delta-method standard error for independent inputs."""
    r = sbz_check(p_rank4, p_rank3, p_abs)
    d4 = 1.0 / p_rank3
    d3 = -(p_rank4 - p_abs) / p_rank3**2
    da = 1.0 / p_rank3
    se = sqrt((d4 * se4) ** 2 + (d3 * se3) ** 2 + (da * se_abs) ** 2)
    return r, se
