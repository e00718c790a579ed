"""Acceptance suite: each criterion is a function returning a result record.

Two levels: ``full`` runs every criterion at its stated sample size and
tolerance; ``smoke`` cuts the sample sizes and widens every statistical
tolerance threefold so the whole suite fits in a couple of minutes.  Exact
(quadrature) criteria keep their tolerances at both levels.
"""

import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import criteria as cr
from . import estimator as est
from .lowdisc import QmcStream
from .oracles import constant, dyson_model, dyson_sigma, fit_curve, rank3_moments, sbz_check_se, verify_identity
from .oracles.models import _marg_quat_lower
from .statespace import PSD_TOL, haar_unitaries, partial_transpose_batch, unitary_coord_count

LEVELS = ("smoke", "full")
SMOKE_WIDEN = 3.0
SEED = 0

# sample sizes per criterion: full, smoke
SAMPLES = {
    1: (2_000_000, 100_000),
    2: (2_000_000, 100_000),
    3: (1_000_000, 100_000),
    "3q": (10_000_000, 1_000_000),
    5: (1_000_000, 100_000),
    6: (1_000_000, 100_000),
    7: (1_000_000, 100_000),
    8: (1_000_000, 100_000),
    9: (2_000_000, 200_000),
    11: (1_000_000, 100_000),
    12: (1_000_000, 100_000),
    13: (100_000, 100_000),
}
# smallest sample size a full run accepts
FULL_MINIMUM = {1: 2_000_000, 2: 2_000_000, 3: 1_000_000, "3q": 10_000_000, 5: 1_000_000,
                6: 1_000_000, 7: 500_000, 8: 500_000, 9: 2_000_000, 11: 1_000_000, 12: 1_000_000,
                13: 100_000}

SUBSETS = {
    "oracle": (4, 10),
    "invariants": (13,),
    "qmc": (1, 2, 3, 5, 6, 7, 8, 9, 11, 12),
}


class AcceptanceConfigError(ValueError):
    pass


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    measured: dict
    target: dict
    tolerance: dict
    detail: str = ""
    seconds: float = 0.0
    samples: dict = field(default_factory=dict)

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        parts = ", ".join(f"{k}={_fmt(v)}" for k, v in self.measured.items())
        return f"criterion {self.number:2d} {status}: {self.title} [{parts}] {self.detail}".rstrip()


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.6g}"
    return str(v)


class _Context:
    """Per-invocation settings plus a cache so identical runs are shared."""

    def __init__(self, level, samples=None, workers=1):
        if level not in LEVELS:
            raise AcceptanceConfigError(f"level must be one of {LEVELS}")
        self.level = level
        self.override = samples
        self.workers = workers
        self.widen = SMOKE_WIDEN if level == "smoke" else 1.0
        self._cache = {}

    def n(self, key):
        full, smoke = SAMPLES[key]
        if self.override is None:
            return full if self.level == "full" else smoke
        if self.level == "full" and self.override < FULL_MINIMUM[key]:
            raise AcceptanceConfigError(
                f"full level needs at least {FULL_MINIMUM[key]} samples for criterion {key}, "
                f"got {self.override}")
        return self.override

    def tol(self, t):
        return t * self.widen

    def cached(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    def ppt_run(self, system, metrics, n, grid=None):
        grid = np.array([0.0, 1.0]) if grid is None else grid
        key = ("curve", system, tuple(metrics), n, grid.size)
        return self.cached(key, lambda: est.alpha_curve(system, "det", list(metrics), n, grid, seed=SEED,
                                                         workers=self.workers))


def _within(value, target, tol):
    return bool(abs(value - target) <= tol)


# -- criteria --------------------------------------------------------------


def _c1(ctx):
    n = ctx.n(1)
    t = ctx.ppt_run("2q-complex", ["hs"], n)
    p, se = t.extra["ppt"]["hs"]
    target, tol = constant("hs_sep_complex").float_value, ctx.tol(0.004)
    return CriterionResult(1, "complex HS PPT probability", _within(p, target, tol),
                           {"p": p, "se": se}, {"p": target}, {"p": tol}, samples={"n": n})


def _c2(ctx):
    n = ctx.n(2)
    # shares samples with the fit-curve criterion when sizes agree
    t = ctx.ppt_run("2q-real", ["hs"], n, est.default_grid(1000))
    p, se = t.extra["ppt"]["hs"]
    target, tol = constant("hs_sep_real").float_value, ctx.tol(0.005)
    return CriterionResult(2, "real HS PPT probability", _within(p, target, tol),
                           {"p": p, "se": se}, {"p": target}, {"p": tol}, samples={"n": n})


def _c3(ctx):
    measured, target, tols, ok = {}, {}, {}, True
    for beta, cid, tol, key in ((1, "abs_sep_hs_real", 0.0005, 3), (2, "abs_sep_hs_complex", 0.0002, 3),
                                (4, "abs_sep_hs_quat", 1.5e-5, "3q")):
        n = ctx.n(key)
        e = est.absolute_separability_probability(beta, "hs", n, seed=SEED, workers=ctx.workers)
        tv = constant(cid).float_value
        measured[f"beta{beta}"] = e.value
        target[f"beta{beta}"] = tv
        tols[f"beta{beta}"] = ctx.tol(tol)
        ok &= _within(e.value, tv, ctx.tol(tol))
    return CriterionResult(3, "absolute separability probabilities", ok, measured, target, tols)


def _c4(ctx):
    measured, target, tols, ok = {}, {}, {}, True
    for beta, tag in ((1, "real"), (2, "complex"), (4, "quat")):
        m = rank3_moments(beta)
        if beta == 4:
            # upper mass from the closed-form lower branch alone
            x, w = np.polynomial.legendre.leggauss(40)
            x = 0.25 * x + 0.25
            upper = 1.0 - 0.25 * float(np.dot(w, [_marg_quat_lower(c) for c in x]))
        else:
            upper = m.upper_mass
        for name, v, cid in (("mass", m.mass, None), ("mean", m.mean, f"rank3_mean_{tag}"),
                             ("upper", upper, f"rank3_{tag}_upper_mass")):
            tv = 1.0 if cid is None else constant(cid).float_value
            key = f"{name}_b{beta}"
            measured[key], target[key], tols[key] = v, tv, 1e-10
            ok &= _within(v, tv, 1e-10)
    return CriterionResult(4, "rank-3 marginal quadrature", ok, measured, target, tols)


def _c5(ctx):
    n = ctx.n(5)
    measured, target, tols, ok = {}, {}, {}, True
    for system, beta, cid, tol in (("2q-complex", 2, "esf_upper_complex", 0.0005),
                                   ("2q-real", 1, "esf_upper_real", 0.0008)):
        model = dyson_model("rank4", beta)
        sigma = np.vectorize(lambda c, m=model: dyson_sigma(m, min(max(c, 0.5), 1.0)))
        e = est.sep_prob_from_esf(sigma, system, beta, "hs", n, (0.5, 1.0), seed=SEED, workers=ctx.workers)
        tv = constant(cid).float_value
        key = "complex" if beta == 2 else "real"
        measured[key], target[key], tols[key] = e.value, tv, ctx.tol(tol)
        ok &= _within(e.value, tv, ctx.tol(tol))
    return CriterionResult(5, "half-range ESF reconstruction", ok, measured, target, tols, samples={"n": n})


def _c6(ctx):
    n = ctx.n(6)
    measured, target, tols, ok = {}, {}, {}, True
    for beta, tag, tol in ((1, "real", 0.003), (2, "complex", 0.003), (4, "quat", 0.004)):
        e = est.sep_prob_from_esf(lambda c: np.ones_like(c), "2q-complex", beta, "hs", n, (0.5, 1.0),
                                  seed=SEED, workers=ctx.workers)
        tv = constant(f"upper_mass_{tag}").float_value
        measured[tag], target[tag], tols[tag] = e.value, tv, ctx.tol(tol)
        ok &= _within(e.value, tv, ctx.tol(tol))
    return CriterionResult(6, "upper-half masses", ok, measured, target, tols, samples={"n": n})


def _esf_pair(ctx, key):
    n = ctx.n(key)
    return tuple(ctx.cached(("esf", s, n), lambda s=s: est.esf_histogram(s, None, 500, n, seed=SEED,
                                                                          workers=ctx.workers))
                 for s in ("2q-real", "2q-complex"))


def _c7(ctx):
    h1, h2 = _esf_pair(ctx, 7)
    r1, se1 = est.one_sided_limit(h1, 0.5, "right")
    r2, se2 = est.one_sided_limit(h2, 0.5, "right")
    ratio = r2 / r1**2
    ratio_se = abs(ratio) * np.sqrt((se2 / r2) ** 2 + 4.0 * (se1 / r1) ** 2)
    tol_r, tol_s = ctx.tol(0.1), ctx.tol(0.005)
    ok = _within(ratio, 2.0, tol_r) and _within(r2, 1.0 / 15.0, tol_s)
    return CriterionResult(7, "Dyson ratio at C_max = 1/2+", ok,
                           {"ratio": ratio, "ratio_se": ratio_se, "sigma2": r2, "sigma2_se": se2, "sigma1": r1},
                           {"ratio": 2.0, "sigma2": 1.0 / 15.0}, {"ratio": tol_r, "sigma2": tol_s},
                           samples={"n_per_beta": h1.n_samples})


def _c8(ctx):
    h1, h2 = _esf_pair(ctx, 8)
    measured, ok = {}, True
    for tag, h in (("real", h1), ("complex", h2)):
        j = est.jump_detect(h, 0.5)
        measured[f"jump_{tag}"] = j.jump
        measured[f"se_{tag}"] = j.se
        ok &= bool(j.jump > 5.0 * j.se)
    return CriterionResult(8, "jump at C_max = 1/2", ok, measured, {"jump": "> 5 se"}, {"sigmas": 5.0},
                           samples={"n_per_beta": h1.n_samples})


def _c9(ctx):
    n = ctx.n(9)
    grid = est.default_grid(1000)
    t = ctx.ppt_run("2q-real", ["hs"], n, grid)
    fit = np.array([fit_curve("real_hs", a) for a in grid])
    msd = float(np.mean((t.p["hs"] - fit) ** 2))
    tol = ctx.tol(0.0015)
    return CriterionResult(9, "real HS det curve vs 8/(8+9 sqrt a)", msd <= tol, {"msd": msd}, {"msd": "<="},
                           {"msd": tol}, samples={"n": n})


def _c10(ctx):
    measured, target, tols, ok = {}, {}, {}, True
    for k in ("desfconj", "desfconjreal"):
        r = verify_identity(k, tolerance=1e-6)
        measured[k], target[k], tols[k] = r.rhs, r.target, 1e-6
        ok &= r.passed(1e-6)
    return CriterionResult(10, "diagonal-entry integral identities", ok, measured, target, tols)


def _c11(ctx):
    n = ctx.n(11)
    metrics = ["hs", "bures", "wy", "km"]
    t = ctx.ppt_run("2q-complex", metrics, n)
    measured, ok = {}, True
    for m in metrics:
        measured[m], measured[f"{m}_se"] = t.extra["ppt"][m]
    for a, b in zip(metrics, metrics[1:]):
        gap = measured[a] - measured[b]
        comb = float(np.hypot(measured[f"{a}_se"], measured[f"{b}_se"]))
        measured[f"gap_{a}_{b}_sigmas"] = gap / comb
        ok &= bool(gap > 3.0 * comb)
    # the Bures value is only a loose sanity bound
    measured["bures_sanity"] = _within(measured["bures"], constant("bures_sep_complex").float_value, 0.01 * ctx.widen)
    return CriterionResult(11, "metric ordering HS > Bures > WY > KM", ok, measured, {"order": "descending"},
                           {"sigmas": 3.0}, samples={"n": n})


def _c12(ctx):
    n = ctx.n(12)
    t4 = ctx.ppt_run("2q-complex", ["hs", "bures", "wy", "km"], n)
    t3 = ctx.ppt_run("2q-complex-rank3", ["hs"], n)
    p4, se4 = t4.extra["ppt"]["hs"]
    p3, se3 = t3.extra["ppt"]["hs"]
    ab = est.absolute_separability_probability(2, "hs", n, seed=SEED, workers=ctx.workers)
    r, se = sbz_check_se(p4, se4, p3, se3, ab.value, ab.se)
    ok = abs(r) <= 3.0 * se
    return CriterionResult(12, "rank-4 / rank-3 corollary", ok,
                           {"residual": r, "se": se, "p_rank4": p4, "p_rank3": p3, "p_abs": ab.value,
                            "conjectured_rank3": constant("rank3_hs_sep_complex").float_value},
                           {"residual": 0.0}, {"sigmas": 3.0}, samples={"n": n})


# -- invariant suites --------------------------------------------------------


def invariant_haar_moments(n):
    """Second and fourth moments of Haar unitary entries against exact values."""
    out = {}
    for field_, exact4 in (("complex", 2.0 / (4 * 5)), ("real", 3.0 / (4 * 6))):
        d = unitary_coord_count(4, field_)
        u, ok = haar_unitaries(QmcStream(d, scramble_seed=11).points(1, n), 4, field_)
        a2 = np.abs(u[ok]) ** 2
        m2, m4 = a2.mean(axis=0), (a2**2).mean(axis=0)
        se4 = (a2**2).std(axis=0).max() / np.sqrt(ok.sum())
        out[field_] = bool(np.max(np.abs(m2 - 0.25)) < 1e-2 and np.max(np.abs(m4 - exact4)) < 6.0 * se4 + 1e-3)
    return all(out.values()), out


def _states(system, n):
    s = est.get_system(system)
    return est.sample_states(s, QmcStream(s.coord_count, scramble_seed=SEED), 1, n)


def invariant_pt_involution(n):
    st = _states("2q-complex", n)
    back = partial_transpose_batch(st.pt, (2, 2))
    return bool(np.array_equal(back, st.rho)), {}


def invariant_concurrence_bound(n):
    st = _states("2q-complex", n)
    c = cr.concurrence_batch(st.rho, st.u, st.spectra)
    cmax, _ = cr.max_concurrence_batch(st.spectra, 4)
    excess = float(np.max(c - cmax))
    return excess <= cr.CONCURRENCE_SLACK, {"max_excess": excess}


def invariant_concurrence_ppt(n, band=1e-7):
    st = _states("2q-complex", n)
    c = cr.concurrence_batch(st.rho, st.u, st.spectra)
    lmin = st.pt_eigs[:, 0]
    # disagreements outside a thin numerical band around the boundary
    bad = ((c <= 0.0) & (lmin < -band)) | ((c > band) & (lmin >= -PSD_TOL))
    return int(bad.sum()) == 0, {"disagreements": int(bad.sum())}


def invariant_replay(n, tmpdir=None):
    import os
    import tempfile

    a = est.alpha_curve("2q-complex", "mineig", ["hs"], n, est.default_grid(50), seed=3)
    b = est.alpha_curve("2q-complex", "mineig", ["hs"], n, est.default_grid(50), seed=3, workers=2)
    same_workers = np.array_equal(a.p["hs"], b.p["hs"]) and np.array_equal(a.se["hs"], b.se["hs"])
    with tempfile.TemporaryDirectory(dir=tmpdir) as d:
        ck = os.path.join(d, "run.ckpt")
        part = est.alpha_curve("2q-complex", "mineig", ["hs"], n, est.default_grid(50), seed=3,
                               checkpoint=ck, stop_after=5)
        c = est.alpha_curve("2q-complex", "mineig", ["hs"], n, est.default_grid(50), seed=3, checkpoint=ck)
    resumed = part is None and np.array_equal(a.p["hs"], c.p["hs"]) and np.array_equal(a.se["hs"], c.se["hs"])
    return bool(same_workers and resumed), {"workers": bool(same_workers), "resume": bool(resumed)}


def invariant_scale(n):
    grid = est.default_grid(50)
    a = est.alpha_curve("2q-complex", "mineig", ["hs", "bures"], n, grid, seed=5)
    b = est.alpha_curve("2q-complex", "mineig", ["hs", "bures"], n, grid, seed=5,
                        weight_scale={"hs": 7.0, "bures": 7.0})
    dev = max(float(np.max(np.abs(a.p[m] - b.p[m]))) for m in ("hs", "bures"))
    return dev <= 1e-12, {"max_dev": dev}


INVARIANTS = {
    "haar_moments": invariant_haar_moments,
    "pt_involution": invariant_pt_involution,
    "concurrence_bound": invariant_concurrence_bound,
    "concurrence_ppt": invariant_concurrence_ppt,
    "replay": invariant_replay,
    "scale_invariance": invariant_scale,
}


def _c13(ctx):
    n = ctx.n(13)
    measured, ok = {}, True
    for name, fn in INVARIANTS.items():
        passed, _ = fn(n)
        measured[name] = passed
        ok &= passed
    return CriterionResult(13, "invariant suites", ok, measured, {}, {}, samples={"n": n})


CRITERIA = {1: _c1, 2: _c2, 3: _c3, 4: _c4, 5: _c5, 6: _c6, 7: _c7, 8: _c8, 9: _c9, 10: _c10,
            11: _c11, 12: _c12, 13: _c13}


def resolve_subset(subset):
    """Criterion numbers from ``None``, a tag, or a comma list of numbers/tags."""
    if subset is None or subset == "all":
        return sorted(CRITERIA)
    out = set()
    for part in str(subset).split(","):
        part = part.strip()
        if part in SUBSETS:
            out.update(SUBSETS[part])
        elif part.isdigit() and int(part) in CRITERIA:
            out.add(int(part))
        else:
            raise AcceptanceConfigError(f"unknown criterion or subset {part!r}")
    return sorted(out)


def run_criterion(number, level="full", samples=None, workers=1, context=None):
    ctx = context or _Context(level, samples, workers)
    t0 = time.perf_counter()
    res = CRITERIA[number](ctx)
    res.seconds = time.perf_counter() - t0
    return res


def run_check(level="smoke", subset=None, samples=None, workers=1, report=print):
    """Run the selected criteria; returns the list of results."""
    numbers = resolve_subset(subset)
    ctx = _Context(level, samples, workers)
    # validate sample overrides before spending any time
    if samples is not None:
        for k in SAMPLES:
            if k == "3q" and 3 not in numbers:
                continue
            if k in numbers or k == "3q":
                ctx.n(k)
    results = []
    for k in numbers:
        res = run_criterion(k, context=ctx)
        if report:
            report(res.line())
        results.append(res)
    return results


def summary_json(results, level):
    def clean(v):
        if isinstance(v, dict):
            return {k: clean(x) for k, x in v.items()}
        if isinstance(v, (np.floating, float)):
            return float(v)
        if isinstance(v, (np.bool_, bool)):
            return bool(v)
        if isinstance(v, np.integer):
            return int(v)
        return v

    return json.dumps({"level": level, "passed": all(r.passed for r in results),
                       "criteria": [clean(asdict(r)) for r in results]}, indent=2, sort_keys=True)


def summary_table(results):
    rows = [f"{'#':>3}  {'status':6}  {'seconds':>8}  title"]
    for r in results:
        rows.append(f"{r.number:>3}  {'PASS' if r.passed else 'FAIL':6}  {r.seconds:8.1f}  {r.title}")
    return "\n".join(rows)
