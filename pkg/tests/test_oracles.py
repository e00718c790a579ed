from fractions import Fraction

import mpmath as mp
import numpy as np
import pytest

from sepprob import estimator as est
from sepprob import oracles as orc
from sepprob.oracles.expr import PI, Num, acot, asec, atan, num, sqrt

# -- constants: independent mpmath route ---------------------------------------


def direct():
    """Constants written straight in mpmath, without the expression trees."""
    with mp.workdps(50):
        r2, pi = mp.sqrt(2), mp.pi
        ac = mp.acot(5 / r2)
        asec3 = mp.acos(mp.mpf(1) / 3)
        return {
            "abs_sep_hs_real": (6928 - 2205 * pi) / mp.mpf(2) ** 4.5,
            "abs_sep_hs_complex": (956877309536 - 781862943168 * r2 - 746624752335 * r2 * pi
                                   + 1990999339560 * r2 * asec3) / (2**16 * 3**5),
            "abs_sep_hs_quat": -13 * (-806338156306739134839776 + 658857590468226345222144 * r2
                                      + 629162653900414735065195 * r2 * pi
                                      - 1677767077067772626840520 * r2 * asec3) / (mp.mpf(2) ** 34 * 3**11),
            "esf_upper_real": mp.sqrt(mp.mpf(3) / 10) * (3162214 - 738885 * r2 * mp.atan(r2))
                              / (2**12 * 5 * 7 * 17 * 19),
            "esf_upper_complex": 7 * (148453588142 - 79729806357 * r2 * ac) / (mp.mpf(2) ** 31 * 3**7 * 17),
            "upper_mass_real": (75962 - 25515 * r2 * mp.atan(r2)) / (2**13 * 3**3),
            "upper_mass_complex": (174957361466 - 124912178055 * r2 * ac) / (mp.mpf(2) ** 31 * 3**5),
            "upper_mass_quat": (217894901318574565900294 - 107614737772623370233945 * r2 * ac)
                               / (mp.mpf(2) ** 63 * 3**10),
            "bures_sep_complex": 1680 * (r2 - 1) / pi**8,
            "complex_fit_c": 8 + 2 * mp.sqrt(66),
            "hs_sep_complex": mp.mpf(8) / 33,
            "rank3_complex_upper_mass": mp.mpf(996431) / (2**11 * 3**6),
        }


@pytest.mark.parametrize("cid", sorted(direct()))
def test_dual_route(cid):
    assert orc.constant(cid).float_value == pytest.approx(float(direct()[cid]), rel=1e-15)


FROZEN = {
    "hs_sep_real": 0.47058823529411764,
    "hs_sep_quat": 0.077376490300067116,
    "km_sep_complex": 0.034377627033767837,
    "abs_sep_hs_real": 0.03483379630015386,
    "abs_sep_hs_complex": 0.0036582630543034855,
    "abs_sep_hs_quat": 3.9870347068019929e-05,
    "esf_upper_real": 0.025596477781026403,
    "esf_upper_complex": 0.010290595186799503,
    "esf_upper_quat_per_kappa": 0.16519106940291678,
    "upper_mass_real": 0.18758445851678368,
    "upper_mass_complex": 0.24196061902497537,
    "upper_mass_quat": 0.3230532165710564,
    "esf_lower_complex_induced": 0.22847538418313942,
    "rank3_quat_upper_mass": 0.74812307476983697,
    "rank3_esf_upper_complex": 0.32783225351363454,
    "beta_fit_p_quat": 19.152101321592113,
    "hs_chamber_normalizer_complex": 9081072000.0,
    "bures_chamber_normalizer": 174304.85864358651,
}


@pytest.mark.parametrize("cid", sorted(FROZEN))
def test_frozen_values(cid):
    assert orc.constant(cid).float_value == FROZEN[cid]


# decimal values printed in the literature next to the formulas
QUOTED = {
    "hs_sep_complex": 0.242424,
    "hs_sep_real": 0.470588,
    "abs_sep_hs_real": 0.0348338,
    "abs_sep_hs_complex": 0.0036582630543035,
    "abs_sep_hs_quat": 0.0000398703,
    "esf_upper_complex": 0.01029059519,
    "esf_upper_real": 0.02559647778,
    "upper_mass_real": 0.187584,
    "upper_mass_complex": 0.241961,
    "upper_mass_quat": 0.323053,
    "rank3_real_upper_mass": 0.604938,
    "rank3_mean_real": 0.535665,
    "bures_sep_complex": 0.0733389,
    "dyson_norm_complex": 0.0666667,
}


@pytest.mark.parametrize("cid", sorted(QUOTED))
def test_quoted_values(cid):
    c = orc.constant(cid)
    digits = len(repr(QUOTED[cid]).split("e")[0].replace(".", "").strip("0"))
    assert abs(c.float_value - QUOTED[cid]) <= 10.0 ** (np.floor(np.log10(QUOTED[cid])) - digits + 1)


def test_registry_quoted_flags():
    mism = {c.id for c in orc.REGISTRY.values() if not c.matches_quoted()}
    assert mism == {"hs_sep_quat", "km_sep_complex"}


def test_exact_rationals():
    with mp.workdps(40):
        assert orc.constant("rank3_real_upper_mass").exact_expression.evaluate(40) == mp.mpf(49) / 81
    assert str(orc.constant("hs_sep_complex").exact_expression) == "8/33"
    assert orc.constant("rank3_mean_complex").float_value == 35 / 64
    assert orc.constant("rank3_quat_upper_mass").float_value == 3335170241153 / (2**23 * 3**12)


def test_unknown_constant_lists_ids():
    with pytest.raises(orc.UnknownConstant) as info:
        orc.constant("nope")
    assert "hs_sep_complex" in str(info.value)
    assert len(orc.constant_ids()) == len(orc.registry_table()) == len(orc.REGISTRY)


def test_expression_trees():
    e = (num(1) + sqrt(2)) * PI / num(3) - atan(1) + acot(1) + asec(2) + num(2) ** Fraction(1, 2)
    with mp.workdps(60):
        ref = (1 + mp.sqrt(2)) * mp.pi / 3 - mp.atan(1) + mp.acot(1) + mp.asec(2) + mp.sqrt(2)
        assert abs(e.evaluate(60) - ref) < mp.mpf(10) ** -50
    assert float(e) == pytest.approx(float(ref), rel=1e-15)
    assert str(num(2) - (num(3) - num(4))) == "2 - (3 - 4)"
    assert isinstance(num(Fraction(1, 3)), Num)


# -- rank-3 marginals ----------------------------------------------------------


def test_marginal_example_at_half():
    assert orc.marg_rank3(0.5, 1) == pytest.approx(224 / 81, rel=1e-14)
    # right branch meets the left branch
    assert orc.marg_rank3(0.5 + 1e-12, 1) == pytest.approx(224 / 81, rel=1e-9)


def test_marginal_domain():
    with pytest.raises(orc.OutOfDomain):
        orc.marg_rank3(0.0, 1)
    with pytest.raises(orc.UnsupportedBranch):
        orc.marg_rank3(0.6, 4)
    with pytest.raises(ValueError):
        orc.marg_rank3(0.3, 3)


@pytest.mark.parametrize("beta,mean,upper", [
    (1, Fraction(781, 1458), Fraction(49, 81)),
    (2, Fraction(35, 64), Fraction(996431, 1492992)),
    (4, Fraction(27313, 49152), Fraction(3335170241153, 2**23 * 3**12)),
])
def test_marginal_moments(beta, mean, upper):
    m = orc.rank3_moments(beta)
    assert abs(m.mass - 1) < 1e-10
    assert abs(m.mean - float(mean)) < 1e-10
    assert abs(m.upper_mass - float(upper)) < 1e-10


@pytest.mark.parametrize("beta", [1, 2, 4])
def test_numeric_marginal_matches_closed_form(beta):
    for c in np.linspace(0.02, 0.5, 13):
        assert orc.marg_rank3_numeric(c, beta) == pytest.approx(orc.marg_rank3(c, beta), rel=1e-10)
    if beta < 4:
        for c in np.linspace(0.52, 0.98, 12):
            assert orc.marg_rank3_numeric(c, beta) == pytest.approx(orc.marg_rank3(c, beta), rel=1e-10)


def test_rank_deficient_weight_reproduces_marginal():
    # QMC histogram of C = l1 - l3 under the rank-3 HS weight vs the closed form
    h = est.marginal_histogram("2q-complex-rank3", 2, "hs", 40, 2**17)
    exact = np.array([np.mean([orc.marg_rank3(c, 2) for c in np.linspace(a, b, 41)[1:-1]])
                      for a, b in zip(h.edges[:-1], h.edges[1:])])
    z = (h.density - exact) / np.where(h.se > 0, h.se, np.inf)
    assert np.mean(np.abs(z) < 3) > 0.9
    assert np.max(np.abs(h.density - exact)) < 0.1


# -- beta fits and alpha-curve fits ---------------------------------------------


def test_beta_fit_pairs():
    assert orc.beta_fit_params(1) == (Fraction(47641, 7196), Fraction(41297, 7196))
    assert orc.beta_fit_params(2) == (Fraction(12323885, 1142816), Fraction(10211219, 1142816))
    p, q = orc.beta_fit_params(4)
    mp_, mq = orc.moment_matched_beta(4)
    assert float(p) == pytest.approx(mp_, rel=1e-9) and float(q) == pytest.approx(mq, rel=1e-9)
    with pytest.raises(ValueError):
        orc.beta_fit_params(3)


def test_fit_curves():
    assert orc.fit_curve("fitReal", 1.0) == pytest.approx(8 / 17, rel=1e-15)
    assert orc.fit_curve("fitReal", 0.0) == 1.0
    assert orc.fit_curve("complex", 1.0) == pytest.approx(8 / 33, abs=1e-12)
    assert orc.fit_curve("bures", 1.0) == pytest.approx(orc.constant("bures_sep_complex").float_value, rel=1e-12)
    assert orc.fit_curve("bures", 0.0) == pytest.approx(1.0, rel=1e-12)
    assert orc.fit_curve("conjBures", 0.5) < 0
    assert orc.fit_curve("qq_complex_sqrt", 1.0) == pytest.approx(64 / 2398, rel=1e-12)
    with pytest.raises(orc.OutOfDomain):
        orc.fit_curve("real_hs", 1.5)
    with pytest.raises(ValueError):
        orc.fit_curve("nope", 0.5)


# -- model separability functions -----------------------------------------------


def test_dyson_examples():
    m4c = orc.dyson_model("rank4", 2)
    assert orc.dyson_sigma(m4c, 0.5) == pytest.approx(1 / 15, rel=1e-15)
    assert orc.dyson_sigma(orc.dyson_model("rank4", 1), 1.0) == 0.0
    pat = orc.dyson_model("rank4_pattern", 2)
    assert orc.dyson_sigma(pat, 0.2) == pytest.approx(1.4 * 0.65**2, rel=1e-14)
    with pytest.raises(orc.OutOfDomain):
        orc.dyson_sigma(pat, 0.0)
    with pytest.raises(orc.OutOfDomain):
        orc.dyson_sigma(m4c, 0.4)
    with pytest.raises(ValueError):
        orc.dyson_sigma(orc.dyson_model("rank4", 4), 0.7)
    assert orc.dyson_sigma(orc.dyson_model("rank4", 4), 0.5, normalized=False) == 1.0
    assert orc.dyson_sigma(orc.dyson_model("rank6", 2), 1 / 3) == pytest.approx(1.0, rel=1e-14)


def test_sbz_examples():
    p4, p3, pa = 8 / 33, 4 / 33, orc.constant("abs_sep_hs_complex").float_value
    assert orc.sbz_check(2 * p3 - pa, p3, pa) == pytest.approx(0.0, abs=1e-15)
    assert orc.sbz_check(0.3, 0.2, 0.0) == pytest.approx(0.3 / 0.2 - 2)
    r, se = orc.sbz_check_se(0.24, 0.001, 0.12, 0.001, 0.0036, 0.0001)
    assert se > 0 and r == orc.sbz_check(0.24, 0.12, 0.0036)


# -- cubature and identities --------------------------------------------------


def test_gm_rule_exactness():
    tri = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    # int x^a y^b over the unit triangle = a! b! / (a+b+2)!
    res = orc.integrate_simplex(lambda p: p[:, 0] ** 3 * p[:, 1] ** 4, tri, tol=1e-14, levels=0)
    assert res.value == pytest.approx(6 * 24 / 362880, rel=1e-13)
    nodes, w = orc.gm_rule(3, 4)
    assert w.sum() == pytest.approx(1.0, rel=1e-13)


def test_cubature_smooth_tetrahedron():
    tet = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1.0]])
    res = orc.integrate_simplex(lambda p: np.exp(p.sum(axis=1)), tet, tol=1e-12)
    assert res.converged
    assert res.value == pytest.approx(np.e / 2 - 1, abs=1e-11)


@pytest.mark.parametrize("id_,target", [("desfconj", 8 / 33), ("desfconjreal", 8 / 17)])
def test_desf_identities(id_, target):
    r = orc.verify_identity(id_)
    assert r.converged and r.passed(1e-6)
    assert abs(r.rhs - target) < 1e-6


def test_esf_identity_zero_sigma():
    r = orc.verify_identity("esfconj", sigma=lambda c: np.zeros_like(c))
    assert r.rhs == 0.0


def test_esf_identity_unit_sigma_normalization():
    # the printed prefactor equals normalizer x target, so sigma == 1 lands on the target
    r = orc.verify_identity("esfconj", sigma=lambda c: np.ones_like(c))
    assert r.rhs == pytest.approx(8 / 33, abs=1e-6)
    one = orc.verify_identity("esfconj", sigma=lambda c: np.ones_like(c),
                              prefactor=orc.constant("hs_chamber_normalizer_complex").float_value)
    assert one.rhs == pytest.approx(1.0, abs=1e-6)


def test_bures_chamber_normalizer():
    # Bures normalization 2^(N^2-N) Gamma(N^2/2) / (pi^(N/2) prod_{j<=N} Gamma(j+1)), N = 4,
    # times 4! for the ordered chamber
    with mp.workdps(30):
        ref = 24 * mp.mpf(2) ** 12 * mp.gamma(8) / (mp.pi**2 * mp.fprod(mp.gamma(j + 1) for j in range(1, 5)))
    k = orc.constant("bures_chamber_normalizer").float_value
    assert k == pytest.approx(float(ref), rel=1e-15)
    r = orc.verify_identity("esfconjBures", sigma=lambda c: np.ones_like(c), prefactor=k)
    assert r.converged and r.rhs == pytest.approx(1.0, abs=1e-6)


def test_bures_absolute_separability_deterministic():
    k = orc.constant("bures_chamber_normalizer").float_value
    r = orc.verify_identity("esfconjBures", sigma=lambda c: (c <= 0).astype(float), prefactor=k,
                            tolerance=1e-5)
    assert r.rhs == pytest.approx(orc.constant("abs_sep_bures_complex").float_value, abs=1e-6)


def test_printed_bures_prefactor_is_reciprocal():
    printed = orc.constant("esfconjBures_normalizer").float_value
    assert printed * orc.constant("bures_chamber_normalizer").float_value / 24 == pytest.approx(1.0, rel=1e-14)


def test_identity_errors():
    with pytest.raises(ValueError):
        orc.verify_identity("nope")
    with pytest.raises(ValueError):
        orc.verify_identity("esfconj")


def test_nu_and_cmax_helpers():
    assert orc.nu_ratio([[0.1, 0.2, 0.3, 0.4]])[0] == pytest.approx(0.04 / 0.06)
    assert orc.cmax_rank4(np.array([[0.5, 0.2, 0.2, 0.1]]))[0] == pytest.approx(0.3 - 2 * np.sqrt(0.02))
