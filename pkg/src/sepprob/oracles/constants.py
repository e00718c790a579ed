"""Registry of exact closed-form constants.

Every entry holds an arithmetic tree; its float is computed from the tree when
the module loads and cross-checked at a second, higher precision.  ``quoted``
is the decimal approximation printed next to the formula in the literature,
kept separately so transcription or printing slips show up as a mismatch
rather than silently replacing the exact value.
"""

from dataclasses import dataclass
from fractions import Fraction

import mpmath

from .expr import PI, acot, asec, atan, num, sqrt

LOAD_RTOL = 1e-12
_DPS = (40, 80)


class UnknownConstant(KeyError):
    pass


@dataclass(frozen=True)
class ClosedFormConstant:
    """One registry entry.

    Attributes:
        id: Registry key.
        exact_expression: Arithmetic tree (see :mod:`sepprob.oracles.expr`).
        float_value: Double derived from the tree at load time.
        provenance: Where the value comes from, in words.
        quoted: Printed decimal approximation, if any.
        note: Caveats (misprints, unknown factors).
    """

    id: str
    exact_expression: object
    float_value: float
    provenance: str
    quoted: float = None
    note: str = ""

    @property
    def expression_text(self):
        return str(self.exact_expression)

    def quoted_digits(self):
        """Significant digits printed in ``quoted`` (0 if there is none)."""
        if self.quoted is None:
            return 0
        if isinstance(self.quoted, int):
            return len(str(abs(self.quoted)).rstrip("0")) or 1
        # shortest round-trip repr is what was typed in
        mant = repr(abs(float(self.quoted))).split("e")[0].replace(".", "")
        return max(len(mant.strip("0")), 1)

    def matches_quoted(self):
        """True when the exact value rounds to the printed approximation."""
        if self.quoted is None:
            return True
        digits = self.quoted_digits()
        # half a unit in the last printed place, with a little slack for
        # truncation instead of rounding
        tol = 10.0 ** (mpmath.floor(mpmath.log10(abs(self.quoted))) - digits + 1)
        return abs(self.float_value - self.quoted) <= float(tol)


# integer coefficients of the absolute-separability and upper-half formulas
PSI = (956877309536, 781862943168, 746624752335, 1990999339560)
PHI = (-806338156306739134839776, 658857590468226345222144,
       629162653900414735065195, 1677767077067772626840520)
ZETA = (174916374035295022487516506, 42964561240209557008032951)
GAMMA = (217894901318574565900294, 107614737772623370233945)

_R2 = sqrt(2)
_ACOT = acot(num(5) / sqrt(2))
_ASEC3 = asec(3)


def _entries():
    abs_real = (6928 - 2205 * PI) / num(2) ** Fraction(9, 2)
    abs_complex = (PSI[0] - PSI[1] * _R2 - PSI[2] * _R2 * PI + PSI[3] * _R2 * _ASEC3) / (
        num(2) ** 16 * num(3) ** 5
    )
    abs_quat = -13 * (PHI[0] + PHI[1] * _R2 + PHI[2] * _R2 * PI - PHI[3] * _R2 * _ASEC3) / (
        num(2) ** 34 * num(3) ** 11
    )
    up_real = (75962 - 25515 * _R2 * atan(_R2)) / (num(2) ** 13 * num(3) ** 3)
    up_complex = (174957361466 - 124912178055 * _R2 * _ACOT) / (num(2) ** 31 * num(3) ** 5)
    up_quat = (GAMMA[0] - GAMMA[1] * _R2 * _ACOT) / (num(2) ** 63 * num(3) ** 10)
    e_real = sqrt(num(3) / 10) * (3162214 - 738885 * _R2 * atan(_R2)) / (
        num(2) ** 12 * 5 * 7 * 17 * 19
    )
    e_complex = 7 * (148453588142 - 79729806357 * _R2 * _ACOT) / (num(2) ** 31 * num(3) ** 7 * 17)
    e_quat = 5 * (ZETA[0] - ZETA[1] * _R2 * _ACOT) / (num(2) ** 66 * num(3) ** 8 * 11 * 29 * 31)
    silver = _R2 - 1

    e = []

    def add(id_, expr, provenance, quoted=None, note=""):
        e.append((id_, expr, provenance, quoted, note))

    # overall conjectured separability probabilities
    add("hs_sep_real", num(8) / 17, "HS separability conjecture, real two-qubit", 0.470588)
    add("hs_sep_complex", num(8) / 33, "HS separability conjecture, complex two-qubit", 0.242424)
    add("hs_sep_quat", num(72442944) / 936239725, "HS separability conjecture, quaternionic two-qubit",
        0.0733389, "printed decimal repeats the Bures value; the fraction is 0.0773765")
    add("bures_sep_complex", 1680 * silver / PI**8, "Bures (silver mean) conjecture, complex two-qubit",
        0.0733389)
    add("km_sep_complex", 1575 * silver / (2 * PI**8), "Kubo-Mori conjecture, complex two-qubit",
        0.035398, "printed decimal does not match the expression (0.0343776)")
    add("avg_monotone_sep_complex", 81664 * silver / (75 * PI**8),
        "average monotone metric conjecture, complex two-qubit", 0.0475329)
    add("wy_sep_numerator", 7 * silver / 4,
        "Wigner-Yanase hypothesis numerator (volume of separable states)", None,
        "the matching total Wigner-Yanase volume is not known")
    add("qq_hs_sep_real", num(32) / 213, "HS conjecture, real qubit-qutrit", 0.150235)
    add("qq_hs_sep_complex", num(32) / 1199, "HS conjecture, complex qubit-qutrit", 0.0266889)
    add("qq_rank5_hs_sep_real", num(16) / 213, "HS rank-5 value, real qubit-qutrit", 0.0751174)
    add("qq_rank5_hs_sep_complex", num(16) / 1199, "HS rank-5 value, complex qubit-qutrit", 0.0133445)
    add("rank3_hs_sep_real", num(4) / 17, "HS rank-3 conjecture, real two-qubit", 0.235294)
    add("rank3_hs_sep_complex", num(4) / 33, "HS rank-3 conjecture, complex two-qubit", 0.121212)

    # decomposition over C_max regions, full rank two-qubit HS
    for k, v in enumerate(PSI, 1):
        add(f"psi_{k}", num(v), "integer coefficient of the complex absolute-separability formula", v)
    for k, v in enumerate(PHI, 1):
        add(f"phi_{k}", num(v), "integer coefficient of the quaternionic absolute-separability formula", v)
    for k, v in enumerate(ZETA, 1):
        add(f"zeta_{k}", num(v), "integer coefficient of the quaternionic upper-half contribution", v)
    for k, v in enumerate(GAMMA, 1):
        add(f"gamma_{k}", num(v), "integer coefficient of the quaternionic upper-half mass", v)
    add("abs_sep_hs_real", abs_real, "HS absolute separability (C_max = 0), real", 0.0348338)
    add("abs_sep_hs_complex", abs_complex, "HS absolute separability (C_max = 0), complex",
        0.0036582630543035)
    add("abs_sep_hs_quat", abs_quat, "HS absolute separability (C_max = 0), quaternionic", 0.0000398703)
    add("abs_sep_bures_complex", None, "Bures absolute separability, complex (numerical only)",
        0.000161792)
    add("esf_upper_real", e_real,
        "separable mass on C_max in [1/2, 1], real, under sigma = (2-2C)^(3/2)/sqrt(30)", 0.02559647778)
    add("esf_upper_complex", e_complex,
        "separable mass on C_max in [1/2, 1], complex, under sigma = (2-2C)^3/15", 0.01029059519)
    add("esf_upper_quat_per_kappa", e_quat,
        "separable mass on C_max in [1/2, 1], quaternionic, per unit of the unknown normalization kappa",
        0.165191, "multiply by kappa, which is not known")
    add("upper_mass_real", up_real, "HS mass of C_max in [1/2, 1], real", 0.187584)
    add("upper_mass_complex", up_complex, "HS mass of C_max in [1/2, 1], complex", 0.241961)
    add("upper_mass_quat", up_quat, "HS mass of C_max in [1/2, 1], quaternionic", 0.323053)
    add("lower_mass_real", 1 - abs_real - up_real, "HS mass of C_max in (0, 1/2], real", 0.777582)
    add("lower_mass_complex", 1 - abs_complex - up_complex, "HS mass of C_max in (0, 1/2], complex",
        0.754381)
    add("lower_mass_quat", 1 - abs_quat - up_quat, "HS mass of C_max in (0, 1/2], quaternionic", 0.676907)
    add("esf_lower_real_induced", num(8) / 17 - abs_real - e_real,
        "separable mass on C_max in (0, 1/2] implied by the real conjecture")
    add("esf_lower_complex_induced", num(8) / 33 - abs_complex - e_complex,
        "separable mass on C_max in (0, 1/2] implied by the complex conjecture")

    # rank-3 two-qubit marginal of C = l1 - l3
    add("rank3_real_upper_mass", num(49) / 81, "rank-3 HS mass of C in [1/2, 1], real", 0.604938)
    add("rank3_complex_upper_mass", num(996431) / (num(2) ** 11 * num(3) ** 6),
        "rank-3 HS mass of C in [1/2, 1], complex", 0.667405)
    add("rank3_quat_upper_mass", num(3335170241153) / (num(2) ** 23 * num(3) ** 12),
        "rank-3 HS mass of C in [1/2, 1], quaternionic", 0.748123)
    add("rank3_mean_real", num(781) / (2 * num(3) ** 6), "rank-3 HS mean of C, real", 0.535665)
    add("rank3_mean_complex", num(35) / 2**6, "rank-3 HS mean of C, complex", 0.546875)
    add("rank3_mean_quat", num(27313) / (num(2) ** 14 * 3), "rank-3 HS mean of C, quaternionic", 0.555684)
    add("rank3_esf_upper_real", num(2**6 * 7 * 1249) / (num(3) ** 6 * 5 * 13 * 31),
        "rank-3 separable contribution on C in [1/2, 1], real, before normalization", 0.380924,
        "multiplied by a normalization constant of about 0.177365")
    add("rank3_esf_upper_complex", num(13 * 289014610051) / (num(2) ** 9 * num(3) ** 9 * 5 * 11 * 23 * 29 * 31),
        "rank-3 separable contribution on C in [1/2, 1], complex, before normalization", 0.327832,
        "multiplied by a normalization constant of about 0.086232")
    add("beta_fit_p_real", num(47641) / 7196, "beta-distribution fit p, rank-3 real", 6.62048)
    add("beta_fit_q_real", num(41297) / 7196, "beta-distribution fit q, rank-3 real", 5.73888)
    add("beta_fit_p_complex", num(12323885) / 1142816, "beta-distribution fit p, rank-3 complex", 10.7838)
    add("beta_fit_q_complex", num(10211219) / 1142816, "beta-distribution fit q, rank-3 complex", 8.93514)
    add("beta_fit_p_quat", num(4108424031600889) / 214515575216232,
        "beta-distribution fit p, rank-3 quaternionic", 19.1521)
    add("beta_fit_q_quat", num(3285024436207367) / 214515575216232,
        "beta-distribution fit q, rank-3 quaternionic", 15.3137)

    # model and identity normalizers
    add("dyson_norm_real", 1 / sqrt(30), "real half-range ESF model normalization 1/sqrt(30)")
    add("dyson_norm_complex", num(1) / 15, "complex half-range ESF model normalization 1/15", 0.0666667)
    add("complex_fit_c", 8 + 2 * sqrt(66), "constant c of the complex alpha-curve fit")
    add("desfconj_normalizer", num(12108096000) / 71, "complex diagonal-entry identity prefactor")
    add("desfconjreal_normalizer", num(1209600) / 17, "real diagonal-entry identity prefactor")
    add("esfconj_normalizer", num(2201472000), "complex eigenvalue identity prefactor")
    add("esfconjreal_normalizer", num(15482880) / 17, "real eigenvalue identity prefactor")
    add("esfconjBures_normalizer", PI**2 / 71680, "Bures eigenvalue identity prefactor, as printed",
        None, "reciprocal of the Bures normalization; see bures_chamber_normalizer")
    add("bures_chamber_normalizer", 24 * 71680 / PI**2,
        "Bures eigenvalue density normalization (71680/pi^2) times 4! for the ordered chamber")
    add("hs_chamber_normalizer_complex", num(2201472000) * 33 / 8,
        "complex HS eigenvalue density normalization on the ordered chamber")
    add("hs_chamber_normalizer_real", num(15482880) / 8,
        "real HS eigenvalue density normalization on the ordered chamber")
    return e


def _build():
    out = {}
    for id_, expr, provenance, quoted, note in _entries():
        if expr is None:
            # numerical-only value: no exact expression exists
            out[id_] = ClosedFormConstant(id_, None, float(quoted), provenance, quoted,
                                          note or "numerical value, no closed form")
            continue
        lo, hi = (expr.evaluate(d) for d in _DPS)
        value = float(lo)
        if abs(hi - value) > LOAD_RTOL * abs(hi):
            raise AssertionError(f"constant {id_} is unstable across working precisions")
        out[id_] = ClosedFormConstant(id_, expr, value, provenance, quoted, note)
    return out


REGISTRY = _build()


def constant(id_):
    try:
        return REGISTRY[id_]
    except KeyError:
        raise UnknownConstant(f"unknown constant {id_!r}; valid ids: {', '.join(sorted(REGISTRY))}") from None


def constant_ids():
    return tuple(REGISTRY)


def registry_table():
    """Rows ``(id, expression, float, provenance)`` for dumping."""
    rows = []
    for c in REGISTRY.values():
        text = c.expression_text if c.exact_expression is not None else "(numerical)"
        rows.append((c.id, text, c.float_value, c.provenance))
    return rows
