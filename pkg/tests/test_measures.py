from itertools import combinations
from math import e, log, sqrt

import numpy as np
import pytest

from sepprob.measures import (EIGEN_FLOOR, MetricId, RejectedSample, cm_function, hs_weight, log_weights,
                              monotone_weight)

SPEC = np.array([0.4, 0.3, 0.2, 0.1])


def test_cm_examples():
    assert cm_function("bures", 1.0, 1.0) == pytest.approx(1.0, rel=1e-15)
    assert cm_function("bures", 1.0, 3.0) == pytest.approx(0.5, rel=1e-15)
    assert cm_function("km", 1.0, e) == pytest.approx(1 / (e - 1), rel=1e-14)
    assert cm_function("wy", 1.0, 4.0) == pytest.approx(4 / 9, rel=1e-15)


@pytest.mark.parametrize("metric", ["bures", "wy", "km"])
def test_cm_diagonal_is_inverse(metric):
    for x in (1e-9, 0.3, 2.0):
        assert cm_function(metric, x, x) == pytest.approx(1 / x, rel=1e-12)
    # km near the diagonal stays accurate
    assert cm_function("km", 0.3, 0.3 * (1 + 1e-12)) == pytest.approx(1 / 0.3, rel=1e-11)


def test_cm_domain():
    with pytest.raises(ValueError):
        cm_function("bures", 0.0, 1.0)
    with pytest.raises(ValueError):
        MetricId("fisher", 2)
    with pytest.raises(ValueError):
        MetricId("bures", 4)
    assert MetricId("hs", 4).beta == 4


def test_hs_examples():
    assert hs_weight(np.full(4, 0.25), 2).value == 0.0
    assert hs_weight(SPEC, 1).value == pytest.approx(1.2e-5, rel=1e-12)
    assert hs_weight(SPEC, 2).value == pytest.approx(1.44e-10, rel=1e-12)


def test_hs_rank_deficient_factor():
    spec = np.array([0.5, 0.3, 0.2, 0.0])
    gaps = 0.2 * 0.3 * 0.1
    assert hs_weight(spec, 2, 4).value == pytest.approx(gaps**2 * (0.5 * 0.3 * 0.2) ** 2, rel=1e-12)


def direct_monotone(spec, metric, beta):
    c = {"bures": lambda x, y: 2 / (x + y),
         "wy": lambda x, y: 4 / (sqrt(x) + sqrt(y)) ** 2,
         "km": lambda x, y: (log(x) - log(y)) / (x - y)}[metric]
    w = np.prod(spec) ** -0.5
    for x, y in combinations(spec, 2):
        w *= ((x - y) ** 2 * c(x, y)) ** (beta / 2)
    return w


@pytest.mark.parametrize("metric", ["bures", "wy", "km"])
@pytest.mark.parametrize("beta", [1, 2])
def test_monotone_direct(metric, beta):
    assert monotone_weight(SPEC, metric, beta).value == pytest.approx(direct_monotone(SPEC, metric, beta),
                                                                      rel=1e-12)


def test_monotone_repeated_and_rejected():
    assert monotone_weight(np.array([0.3, 0.3, 0.2, 0.2]), "bures", 2).value == 0.0
    with pytest.raises(RejectedSample):
        monotone_weight(np.array([0.5, 0.3, 0.2, EIGEN_FLOOR / 2]), "bures", 2)
    with pytest.raises(ValueError):
        monotone_weight(np.array([0.5, 0.5, 0.0, 0.0]), "bures", 2)


def test_wy_bures_ratio():
    # (sqrt x + sqrt y)^2 <= 2 (x + y), so every pair factor is >= 1
    rng = np.random.default_rng(0)
    for _ in range(100):
        spec = np.sort(rng.dirichlet(np.ones(4)))[::-1]
        for beta in (1, 2):
            ratio = monotone_weight(spec, "wy", beta).value / monotone_weight(spec, "bures", beta).value
            direct = 1.0
            for x, y in combinations(spec, 2):
                direct *= (cm_function("wy", x, y) / cm_function("bures", x, y)) ** (beta / 2)
            assert ratio == pytest.approx(direct, rel=1e-10)
            assert ratio >= 1.0


def test_log_weights_dispatch():
    spectra = np.array([SPEC, [0.7, 0.2, 0.1, 0.0]])
    lw, ok = log_weights(spectra[:1], MetricId("km", 2), 4, 4)
    assert ok.all() and np.isfinite(lw).all()
    lw, ok = log_weights(spectra[1:], MetricId("hs", 1), 4, 3)
    assert ok.all()
    with pytest.raises(ValueError):
        log_weights(spectra[1:], MetricId("bures", 1), 4, 3)
