"""Weighted QMC estimators over density-matrix ensembles.

Every estimate is a self-normalized ratio ``sum w f / sum w`` with ``w`` the
measure weight of the sampled spectrum.  The index range ``[1, n]`` of the
stream is cut into contiguous blocks; each block is processed in fixed-size
chunks, so a block's tallies depend only on its index range.  Blocks are
merged in block order with compensated summation and standard errors come
from the spread of per-block ratios.  Results are therefore identical for
any worker count.

Weights live in log space: each tally carries a log scale and its arrays are
rescaled whenever a larger chunk maximum arrives.
"""

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import criteria as cr
from . import measures as ms
from .lowdisc import QmcStream
from .statespace import (
    PSD_TOL,
    assemble_states,
    eigvalsh_batch,
    haar_unitaries,
    partial_transpose_batch,
    simplex_spectra,
    unitary_coord_count,
)

MIN_BLOCKS = 16
DEFAULT_CHUNK = 16384
CHECKPOINT_VERSION = 1


class DegenerateRun(RuntimeError):
    """Total weight of a run is zero."""


@dataclass(frozen=True)
class System:
    name: str
    dims: tuple
    field: str
    rank: int

    @property
    def n_levels(self):
        return self.dims[0] * self.dims[1]

    @property
    def beta(self):
        return 1 if self.field == "real" else 2

    @property
    def two_qubit(self):
        return self.dims == (2, 2)

    @property
    def full_rank(self):
        return self.rank == self.n_levels

    @property
    def coord_count(self):
        return unitary_coord_count(self.n_levels, self.field) + self.rank


SYSTEMS = {
    s.name: s
    for s in (
        System("2q-real", (2, 2), "real", 4),
        System("2q-complex", (2, 2), "complex", 4),
        System("2q-real-rank3", (2, 2), "real", 3),
        System("2q-complex-rank3", (2, 2), "complex", 3),
        System("qq-real", (2, 3), "real", 6),
        System("qq-complex", (2, 3), "complex", 6),
        System("qq-real-rank5", (2, 3), "real", 5),
        System("qq-complex-rank5", (2, 3), "complex", 5),
    )
}
CURVE_SYSTEMS = ("2q-real", "2q-complex", "2q-real-rank3", "2q-complex-rank3", "qq-real", "qq-complex")


def get_system(name):
    try:
        return SYSTEMS[name]
    except KeyError:
        raise ValueError(f"unknown system {name!r}; choose from {sorted(SYSTEMS)}") from None


def check_compatible(system, constraint, metrics, grid=None):
    """Raise ``ValueError`` for combinations the estimators do not define."""
    if system.name not in CURVE_SYSTEMS:
        raise ValueError(f"{system.name} supports histogram runs only")
    if constraint not in cr.CONSTRAINTS:
        raise ValueError(f"unknown constraint {constraint!r}")
    if constraint in ("det", "convdet", "concurrence") and not system.two_qubit:
        raise ValueError(f"constraint {constraint} needs a two-qubit system")
    if constraint == "convdet" and not system.full_rank:
        raise ValueError("convdet is defined for full-rank states only")
    for m in metrics:
        if m not in ms.METRICS:
            raise ValueError(f"unknown metric {m!r}")
        if m != "hs" and not system.full_rank:
            raise ValueError("monotone metrics need a full-rank system")
    if grid is not None and constraint != "convmineig":
        g = np.asarray(grid)
        if g.min() < 0.0 or g.max() > 1.0:
            raise ValueError("grids outside [0, 1] are supported by convmineig only")


# -- log-scaled tallies ----------------------------------------------------


class Tally:
    """Arrays of sums ``sum exp(power * log_w) x`` held at a common log scale.

    ``power`` is 1 for weighted sums, 2 for sums of squared weights and 0
    for plain counts.
    """

    def __init__(self, log_scale=-np.inf, data=None, power=None):
        self.log_scale = log_scale
        self.data = data if data is not None else {}
        self.power = power if power is not None else {}

    def add(self, log_scale, data, power):
        if not self.data:
            self.log_scale = log_scale
            self.data = {k: np.array(v, dtype=float) for k, v in data.items()}
            self.power = dict(power)
            return
        new = max(self.log_scale, log_scale)
        if new == -np.inf:
            f_old = f_in = 1.0
        else:
            f_old = np.exp(self.log_scale - new)
            f_in = np.exp(log_scale - new)
        for k, v in data.items():
            p = power[k]
            self.data[k] = self.data[k] * f_old**p + np.asarray(v, dtype=float) * f_in**p
        self.log_scale = new

    def rescaled(self, log_scale):
        if self.log_scale == -np.inf:
            return {k: v.copy() for k, v in self.data.items()}
        f = np.exp(self.log_scale - log_scale)
        return {k: v * f ** self.power[k] for k, v in self.data.items()}

    def to_json(self):
        return {
            "log_scale": float(self.log_scale).hex(),
            "data": {k: [self.power[k], [float(x).hex() for x in np.ravel(v)], list(np.shape(v))]
                     for k, v in self.data.items()},
        }

    @classmethod
    def from_json(cls, obj):
        data, power = {}, {}
        for k, (p, vals, shape) in obj["data"].items():
            data[k] = np.array([float.fromhex(x) for x in vals]).reshape(shape)
            power[k] = p
        return cls(float.fromhex(obj["log_scale"]), data, power)


def neumaier_sum(arrays):
    """Compensated elementwise sum of a sequence of equally shaped arrays."""
    arrays = list(arrays)
    s = np.zeros_like(arrays[0], dtype=float)
    c = np.zeros_like(s)
    for x in arrays:
        t = s + x
        c += np.where(np.abs(s) >= np.abs(x), (s - t) + x, (x - t) + s)
        s = t
    return s + c


def weighted_chunk(log_w):
    """Scale a chunk's log weights by their max; returns ``(log_scale, w)``."""
    finite = np.isfinite(log_w)
    if not finite.any():
        return -np.inf, np.zeros(log_w.shape)
    m = float(log_w[finite].max())
    return m, np.where(finite, np.exp(log_w - m), 0.0)


@dataclass
class BlockResult:
    tallies: dict
    counters: dict


@dataclass
class Merged:
    totals: dict
    blocks: dict
    counters: dict
    log_scale: dict


def _block_ranges(n_samples, n_blocks, start=1):
    base, extra = divmod(n_samples, n_blocks)
    out = []
    lo = start
    for b in range(n_blocks):
        size = base + (1 if b < extra else 0)
        out.append((lo, size))
        lo += size
    return out


def _checkpoint_load(path, key):
    done = {}
    if path is None or not os.path.exists(path):
        return done
    with open(path, encoding="ascii") as fh:
        header = json.loads(fh.readline())
        if header.get("version") != CHECKPOINT_VERSION or header.get("key") != key:
            raise ValueError(f"checkpoint {path} belongs to a different run")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            done[rec["block"]] = BlockResult(
                {m: Tally.from_json(t) for m, t in rec["tallies"].items()}, rec["counters"]
            )
    return done


def _checkpoint_append(path, key, block, result):
    fresh = not os.path.exists(path)
    with open(path, "a", encoding="ascii") as fh:
        if fresh:
            fh.write(json.dumps({"version": CHECKPOINT_VERSION, "key": key}) + "\n")
        rec = {
            "block": block,
            "tallies": {m: t.to_json() for m, t in result.tallies.items()},
            "counters": result.counters,
        }
        fh.write(json.dumps(rec, sort_keys=True) + "\n")


def run_blocks(n_samples, n_blocks, evaluate, *, chunk=DEFAULT_CHUNK, workers=1,
               checkpoint=None, run_key="", stop_after=None):
    """Evaluate all blocks and merge them in block order.

    ``evaluate(start, count)`` returns ``(tallies, counters)`` where tallies
    maps a key to ``(log_scale, data, power)``.  With ``checkpoint`` set,
    finished blocks are appended to that file and reloaded on the next call;
    ``stop_after`` ends the run after that many new blocks (for resume tests)
    and returns ``None``.
    """
    if n_blocks < MIN_BLOCKS:
        raise ValueError(f"at least {MIN_BLOCKS} blocks are required")
    if n_samples < n_blocks:
        raise ValueError("n_samples must be at least the block count")
    ranges = _block_ranges(n_samples, n_blocks)
    done = _checkpoint_load(checkpoint, run_key)

    def run_block(b):
        lo, size = ranges[b]
        tallies = {}
        counters = {}
        for s in range(lo, lo + size, chunk):
            cnt = min(chunk, lo + size - s)
            chunk_tallies, chunk_counters = evaluate(s, cnt)
            for key, (scale, data, power) in chunk_tallies.items():
                tallies.setdefault(key, Tally()).add(scale, data, power)
            for key, v in chunk_counters.items():
                counters[key] = counters.get(key, 0) + int(v)
        return BlockResult(tallies, counters)

    todo = [b for b in range(n_blocks) if b not in done]
    if stop_after is not None:
        todo = todo[:stop_after]
    if workers > 1 and len(todo) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for b, res in zip(todo, pool.map(run_block, todo)):
                done[b] = res
                if checkpoint is not None:
                    _checkpoint_append(checkpoint, run_key, b, res)
    else:
        for b in todo:
            done[b] = run_block(b)
            if checkpoint is not None:
                _checkpoint_append(checkpoint, run_key, b, done[b])
    if len(done) < n_blocks:
        return None
    return merge_blocks([done[b] for b in range(n_blocks)])


def merge_blocks(results):
    keys = sorted({k for r in results for k in r.tallies})
    totals, blocks, scales = {}, {}, {}
    for key in keys:
        ts = [r.tallies[key] for r in results if key in r.tallies]
        top = max(t.log_scale for t in ts)
        per = [t.rescaled(top) for t in ts]
        names = per[0].keys()
        blocks[key] = {n: np.stack([p[n] for p in per]) for n in names}
        totals[key] = {n: neumaier_sum([p[n] for p in per]) for n in names}
        scales[key] = top
    counters = {}
    for r in results:
        for k, v in r.counters.items():
            counters[k] = counters.get(k, 0) + v
    return Merged(totals, blocks, counters, scales)


def ratio_se(s_blocks, w_blocks, s_total, w_total):
    """Block standard error of ``S/W`` from per-block sums (last axis free)."""
    n_b = s_blocks.shape[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        p = s_total / w_total
        dev = s_blocks - p * w_blocks
        return np.sqrt(n_b / (n_b - 1) * np.sum(dev * dev, axis=0)) / w_total


# -- state pipeline --------------------------------------------------------


@dataclass
class StateBatch:
    spectra: np.ndarray
    u: np.ndarray
    rho: np.ndarray
    pt: np.ndarray
    pt_eigs: np.ndarray
    rejected: int


def sample_states(system, stream, start, count):
    pts = stream.points(start, count)
    nu = unitary_coord_count(system.n_levels, system.field)
    u, ok = haar_unitaries(pts[:, :nu], system.n_levels, system.field)
    lam, ok_s = simplex_spectra(pts[:, nu:], system.n_levels)
    ok &= ok_s
    u, lam = u[ok], lam[ok]
    rho = assemble_states(u, lam)
    pt = partial_transpose_batch(rho, system.dims)
    return StateBatch(lam, u, rho, pt, eigvalsh_batch(pt), int(count - ok.sum()))


def _metric_ids(metrics, beta):
    return [ms.MetricId(m, beta) for m in metrics]


def _log_weights(spectra, metric, system, weight_scale):
    lw, ok = ms.log_weights(spectra, metric, system.n_levels, system.rank)
    if weight_scale and metric.name in weight_scale:
        lw = lw + np.log(weight_scale[metric.name])
    return lw, ok


# -- alpha curves ----------------------------------------------------------


@dataclass
class CurveTable:
    """Estimated feasibility probability per grid point and metric."""

    grid: np.ndarray
    metrics: list
    p: dict
    se: dict
    ess: dict
    system: str
    constraint: str
    n_samples: int
    rejected: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)


def default_grid(steps=1000, lo=0.0, hi=1.0):
    return lo + (hi - lo) * np.arange(steps + 1) / steps


def alpha_curve(system, constraint, metrics, n_samples, grid=None, *, seed=0,
                n_blocks=MIN_BLOCKS, workers=1, chunk=DEFAULT_CHUNK, weight_scale=None,
                checkpoint=None, stop_after=None):
    """Feasibility probability of ``constraint`` over an alpha grid.

    ``p_m(alpha) = sum_i w_m(i) 1[alpha in F_i] / sum_i w_m(i)`` for each
    metric, with ``F_i`` the feasible set of sample ``i``.  ``extra`` holds the
    weighted PPT probability computed on the same samples.
    """
    system = get_system(system) if isinstance(system, str) else system
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    if grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly ascending with at least 2 points")
    check_compatible(system, constraint, metrics, grid)
    mids = _metric_ids(metrics, system.beta)
    stream = QmcStream(system.coord_count, scramble_seed=seed)
    g = grid.size

    def evaluate(start, count):
        st = sample_states(system, stream, start, count)
        counters = {"rejected_states": st.rejected, "multi_crossings": 0}
        entangled = st.pt_eigs[:, 0] < -PSD_TOL
        lo = hi = None
        if constraint == "det":
            t = cr.det_thresholds(st.spectra, st.pt_eigs, system.rank)
        elif constraint == "mineig":
            t = cr.mineig_thresholds(st.spectra, st.pt_eigs, system.rank)
        elif constraint == "convdet":
            t, n_multi = cr.convdet_thresholds(st.rho, st.pt, st.spectra, st.pt_eigs)
            counters["multi_crossings"] = n_multi
        elif constraint == "concurrence":
            c = cr.concurrence_batch(st.rho, st.u, st.spectra)
            c_max, _ = cr.max_concurrence_batch(st.spectra, system.rank)
            t = cr.concurrence_thresholds(c, c_max)
        else:
            lo, hi = cr.convmineig_bounds(st.rho, st.pt, grid)
        if lo is None:
            k = np.searchsorted(grid, t, side="right")
        k_ppt = np.where(entangled, 0, 1)
        tallies = {}
        for mid in mids:
            lw, ok = _log_weights(st.spectra, mid, system, weight_scale)
            counters[f"rejected_{mid.name}"] = int((~ok).sum())
            scale, w = weighted_chunk(lw)
            if lo is None:
                bins = np.bincount(k, weights=w, minlength=g + 1)
                data = {"bins": bins}
                power = {"bins": 1}
            else:
                # empty masks are parked past the grid so they only count in W
                empty = lo > hi
                lo_c = np.where(empty, g, lo)
                stop_c = np.where(empty, g, hi + 1)
                start_bins = np.bincount(lo_c, weights=w, minlength=g + 1)
                stop_bins = np.bincount(stop_c, weights=w, minlength=g + 1)
                data = {"start": start_bins, "stop": stop_bins}
                power = {"start": 1, "stop": 1}
            data["ppt"] = np.bincount(k_ppt, weights=w, minlength=2)
            data["w2"] = np.array([np.sum(w * w)])
            data["n"] = np.array([float(w.size)])
            power.update({"ppt": 1, "w2": 2, "n": 0})
            tallies[mid.name] = (scale, data, power)
        return tallies, counters

    key = _run_key("alpha_curve", system.name, constraint, metrics, n_samples, seed, n_blocks,
                   grid, weight_scale)
    merged = run_blocks(n_samples, n_blocks, evaluate, chunk=chunk, workers=workers,
                        checkpoint=checkpoint, run_key=key, stop_after=stop_after)
    if merged is None:
        return None
    p, se, ess, ppt = {}, {}, {}, {}
    for m in metrics:
        tot, blk = merged.totals[m], merged.blocks[m]
        if "bins" in tot:
            s_tot, w_tot = _suffix_curve(tot["bins"])
            s_blk, w_blk = _suffix_curve(blk["bins"])
        else:
            s_tot, w_tot = _interval_curve(tot)
            s_blk, w_blk = _interval_curve(blk)
        if not w_tot > 0:
            raise DegenerateRun(f"zero total weight for metric {m}")
        p[m] = s_tot / w_tot
        se[m] = ratio_se(s_blk, w_blk[:, None], s_tot, w_tot)
        ess[m] = float(w_tot**2 / tot["w2"][0])
        ppt_tot = tot["ppt"][1]
        ppt[m] = (float(ppt_tot / w_tot),
                  float(ratio_se(blk["ppt"][:, 1], w_blk, ppt_tot, w_tot)))
    counters = merged.counters
    rejected = {m: counters.get(f"rejected_{m}", 0) + counters.get("rejected_states", 0) for m in metrics}
    return CurveTable(grid, list(metrics), p, se, ess, system.name, constraint, n_samples, rejected,
                      {"ppt": ppt, "multi_crossings": counters.get("multi_crossings", 0)})


def _suffix_curve(bins):
    """``S_g = sum_{k > g} bins[k]`` and ``W = sum_k bins[k]`` (last axis)."""
    suffix = np.cumsum(bins[..., ::-1], axis=-1)[..., ::-1]
    return suffix[..., 1:], suffix[..., 0]


def _interval_curve(data):
    opened = np.cumsum(data["start"], axis=-1)
    s = opened[..., :-1] - np.cumsum(data["stop"], axis=-1)[..., :-1]
    return s, opened[..., -1]


def _run_key(*parts):
    def norm(x):
        if isinstance(x, np.ndarray):
            return [float(v).hex() for v in x]
        if isinstance(x, dict):
            return {k: norm(v) for k, v in sorted(x.items())}
        if isinstance(x, (list, tuple)):
            return [norm(v) for v in x]
        if isinstance(x, float):
            return x.hex()
        return x

    import hashlib

    return hashlib.sha256(json.dumps(norm(parts), sort_keys=True).encode()).hexdigest()[:32]


# -- eigenvalue-only runs --------------------------------------------------


def _eigen_shape(system):
    if isinstance(system, str):
        system = get_system(system)
    return system.n_levels, system.rank


def _eigen_run(n_levels, rank, metric, n_samples, tally_fn, *, seed, n_blocks, workers, chunk,
               weight_scale=None, checkpoint=None, run_key="", stop_after=None):
    stream = QmcStream(rank, scramble_seed=seed)

    def evaluate(start, count):
        lam, ok = simplex_spectra(stream.points(start, count), n_levels)
        lam = lam[ok]
        lw, okw = ms.log_weights(lam, metric, n_levels, rank)
        if weight_scale:
            lw = lw + np.log(weight_scale)
        scale, w = weighted_chunk(lw)
        c_max, raw = cr.max_concurrence_batch(lam, rank)
        data, power = tally_fn(c_max, raw, w)
        data["w2"] = np.array([np.sum(w * w)])
        power["w2"] = 2
        counters = {"rejected": int(count - ok.sum()) + int((~okw).sum())}
        return {"t": (scale, data, power)}, counters

    return run_blocks(n_samples, n_blocks, evaluate, chunk=chunk, workers=workers,
                      checkpoint=checkpoint, run_key=run_key, stop_after=stop_after)


@dataclass(frozen=True)
class Estimate:
    value: float
    se: float
    ess: float
    n_samples: int
    rejected: int = 0


def _estimate(merged, s_name, n_samples):
    tot, blk = merged.totals["t"], merged.blocks["t"]
    s, w = tot[s_name][0], tot["w"][0]
    if not w > 0:
        raise DegenerateRun("zero total weight")
    se = ratio_se(blk[s_name][:, 0], blk["w"][:, 0], s, w)
    return Estimate(float(s / w), float(se), float(w * w / tot["w2"][0]), n_samples,
                    merged.counters.get("rejected", 0))


def absolute_separability_probability(beta, metric="hs", n_samples=10**6, *, system="2q-complex",
                                      seed=0, n_blocks=MIN_BLOCKS, workers=1, chunk=DEFAULT_CHUNK):
    """Weighted fraction of spectra with non-positive raw maximal concurrence."""
    n_levels, rank = _eigen_shape(system)
    mid = ms.MetricId(metric, beta)

    def tally(c_max, raw, w):
        return ({"w": np.array([w.sum()]), "s": np.array([w[raw <= 0.0].sum()])},
                {"w": 1, "s": 1})

    merged = _eigen_run(n_levels, rank, mid, n_samples, tally, seed=seed, n_blocks=n_blocks,
                        workers=workers, chunk=chunk)
    return _estimate(merged, "s", n_samples)


def sep_prob_from_esf(sigma, system, beta, metric="hs", n_samples=10**6, c_range=(0.0, 1.0), *,
                      seed=0, n_blocks=MIN_BLOCKS, workers=1, chunk=DEFAULT_CHUNK, weight_scale=None):
    """``E[sigma(C_max) 1[C_max in c_range]]`` under the eigenvalue measure.

    ``sigma`` is a callable (vectorized over C) or an :class:`EsfHistogram`,
    which is read as a piecewise-constant function of its bins.
    """
    n_levels, rank = _eigen_shape(system)
    mid = ms.MetricId(metric, beta)
    lo, hi = c_range
    if not 0.0 <= lo <= hi <= 1.0:
        raise ValueError("c_range must lie inside [0, 1]")
    fn = sigma.as_function() if isinstance(sigma, EsfHistogram) else sigma

    def tally(c_max, raw, w):
        inside = (c_max >= lo) & (c_max <= hi)
        vals = np.zeros(c_max.shape)
        if inside.any():
            vals[inside] = np.broadcast_to(np.asarray(fn(c_max[inside]), dtype=float), (int(inside.sum()),))
        return ({"w": np.array([w.sum()]), "s": np.array([np.sum(w * vals)])}, {"w": 1, "s": 1})

    merged = _eigen_run(n_levels, rank, mid, n_samples, tally, seed=seed, n_blocks=n_blocks,
                        workers=workers, chunk=chunk, weight_scale=weight_scale)
    return _estimate(merged, "s", n_samples)


@dataclass
class MarginalHistogram:
    edges: np.ndarray
    density: np.ndarray
    se: np.ndarray
    mass: np.ndarray
    mean: float
    mean_se: float
    variable: str
    ess: float

    def mass_between(self, lo, hi):
        """Mass of bins lying inside [lo, hi] (edges must align)."""
        sel = (self.edges[:-1] >= lo - 1e-12) & (self.edges[1:] <= hi + 1e-12)
        return float(self.mass[sel].sum())


def bin_edges(n_bins, lo=0.0, hi=1.0):
    return lo + (hi - lo) * np.arange(n_bins + 1) / n_bins


def bin_index(x, edges):
    return np.clip(np.searchsorted(edges, x, side="right") - 1, 0, edges.size - 2)


def marginal_histogram(system, beta, metric="hs", n_bins=150, n_samples=10**6, *, seed=0,
                       n_blocks=MIN_BLOCKS, workers=1, chunk=DEFAULT_CHUNK):
    """Self-normalized histogram of the maximal concurrence.

    Full-rank two-qubit runs bin the raw value on [-1/2, 1]; rank-deficient
    runs bin the clipped value on [0, 1].
    """
    n_levels, rank = _eigen_shape(system)
    mid = ms.MetricId(metric, beta)
    raw_mode = rank == n_levels == 4
    lo = -0.5 if raw_mode else 0.0
    edges = bin_edges(n_bins, lo, 1.0)

    def tally(c_max, raw, w):
        x = raw if raw_mode else c_max
        idx = bin_index(x, edges)
        return ({"w": np.array([w.sum()]), "bins": np.bincount(idx, weights=w, minlength=n_bins),
                 "m1": np.array([np.sum(w * x)])}, {"w": 1, "bins": 1, "m1": 1})

    merged = _eigen_run(n_levels, rank, mid, n_samples, tally, seed=seed, n_blocks=n_blocks,
                        workers=workers, chunk=chunk)
    tot, blk = merged.totals["t"], merged.blocks["t"]
    w = tot["w"][0]
    mass = tot["bins"] / w
    se = ratio_se(blk["bins"], blk["w"], tot["bins"], w)
    width = np.diff(edges)
    mean = float(tot["m1"][0] / w)
    mean_se = float(ratio_se(blk["m1"][:, 0], blk["w"][:, 0], tot["m1"][0], w))
    return MarginalHistogram(edges, mass / width, se / width, mass, mean, mean_se,
                             "c_max_raw" if raw_mode else "c_max", float(w * w / tot["w2"][0]))


# -- ESF histograms --------------------------------------------------------


@dataclass
class EsfHistogram:
    """Binned separable fraction as a function of maximal concurrence."""

    edges: np.ndarray
    sigma: np.ndarray
    se: np.ndarray
    weight: np.ndarray
    counts: np.ndarray
    sigma_unweighted: np.ndarray
    se_unweighted: np.ndarray
    beta: int
    system: str
    n_samples: int
    block_s: np.ndarray = field(repr=False, default=None)
    block_w: np.ndarray = field(repr=False, default=None)

    @property
    def mids(self):
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def mass(self):
        return self.weight / self.weight.sum()

    def empty_bins(self):
        return np.flatnonzero(self.counts == 0)

    def as_function(self):
        sig = np.nan_to_num(self.sigma)
        edges = self.edges

        def f(c):
            return sig[bin_index(np.asarray(c, dtype=float), edges)]

        return f


def esf_histogram(system, beta=None, n_bins=500, n_samples=10**6, *, metric="hs", seed=0,
                  n_blocks=MIN_BLOCKS, workers=1, chunk=DEFAULT_CHUNK, checkpoint=None,
                  stop_after=None):
    """Weighted PPT fraction per maximal-concurrence bin on [0, 1]."""
    system = get_system(system) if isinstance(system, str) else system
    beta = system.beta if beta is None else beta
    if n_bins < 25:
        raise ValueError("at least 25 bins are required")
    mid = ms.MetricId(metric, beta)
    edges = bin_edges(n_bins)
    stream = QmcStream(system.coord_count, scramble_seed=seed)

    def evaluate(start, count):
        st = sample_states(system, stream, start, count)
        sep = st.pt_eigs[:, 0] >= -PSD_TOL
        c_max, _ = cr.max_concurrence_batch(st.spectra, system.rank)
        idx = bin_index(c_max, edges)
        lw, ok = ms.log_weights(st.spectra, mid, system.n_levels, system.rank)
        scale, w = weighted_chunk(lw)
        data = {
            "w": np.bincount(idx, weights=w, minlength=n_bins),
            "s": np.bincount(idx, weights=w * sep, minlength=n_bins),
            "w2": np.bincount(idx, weights=w * w, minlength=n_bins),
            "n": np.bincount(idx, minlength=n_bins).astype(float),
            "n_sep": np.bincount(idx, weights=sep.astype(float), minlength=n_bins),
        }
        power = {"w": 1, "s": 1, "w2": 2, "n": 0, "n_sep": 0}
        return {"t": (scale, data, power)}, {"rejected": st.rejected + int((~ok).sum())}

    key = _run_key("esf", system.name, beta, metric, n_bins, n_samples, seed, n_blocks)
    merged = run_blocks(n_samples, n_blocks, evaluate, chunk=chunk, workers=workers,
                        checkpoint=checkpoint, run_key=key, stop_after=stop_after)
    if merged is None:
        return None
    tot, blk = merged.totals["t"], merged.blocks["t"]
    with np.errstate(divide="ignore", invalid="ignore"):
        sigma = tot["s"] / tot["w"]
        sigma_u = tot["n_sep"] / tot["n"]
    se = ratio_se(blk["s"], blk["w"], tot["s"], tot["w"])
    se_u = ratio_se(blk["n_sep"], blk["n"], tot["n_sep"], tot["n"])
    return EsfHistogram(edges, sigma, se, tot["w"], tot["n"], sigma_u, se_u, beta, system.name,
                        n_samples, blk["s"], blk["w"])


def _local_linear(h, lo, hi, at):
    """Weighted linear fit of sigma over bins with midpoints in (lo, hi).

    Returns ``(value at 'at', se, n_bins)``; the fit is linear in the bin
    ratios, so its block error follows from the per-block ratio deviations.
    """
    x = h.mids
    sel = (x > lo) & (x < hi) & (h.weight > 0)
    n = int(sel.sum())
    if n < 5:
        raise ValueError(f"need at least 5 populated bins in ({lo}, {hi}), found {n}")
    xs, ws, sig = x[sel] - at, h.weight[sel], h.sigma[sel]
    design = np.stack([np.ones(n), xs], axis=1)
    gram = design.T @ (design * ws[:, None])
    coef_map = np.linalg.solve(gram, (design * ws[:, None]).T)[0]
    value = float(coef_map @ sig)
    s_b, w_b = h.block_s[:, sel], h.block_w[:, sel]
    dev = (s_b - sig * w_b) / h.weight[sel]
    d = dev @ coef_map
    n_b = d.size
    se = float(np.sqrt(n_b / (n_b - 1) * np.sum(d * d)))
    return value, se, d


@dataclass(frozen=True)
class Jump:
    jump: float
    se: float
    left: float
    right: float
    left_se: float
    right_se: float


def one_sided_limit(h, candidate, side, width=0.1):
    if side == "right":
        v, s, _ = _local_linear(h, candidate, candidate + width, candidate)
    else:
        v, s, _ = _local_linear(h, candidate - width, candidate, candidate)
    return v, s


def jump_detect(h, candidate, width=0.1):
    """Left limit minus right limit of the ESF at ``candidate``."""
    if not h.edges[0] < candidate < h.edges[-1]:
        raise ValueError("candidate must lie strictly inside the histogram range")
    left, left_se, dl = _local_linear(h, candidate - width, candidate, candidate)
    right, right_se, dr = _local_linear(h, candidate, candidate + width, candidate)
    d = dl - dr
    n_b = d.size
    se = float(np.sqrt(n_b / (n_b - 1) * np.sum(d * d)))
    return Jump(left - right, se, left, right, left_se, right_se)


@dataclass
class RatioReport:
    mids: np.ndarray
    ratio: np.ndarray
    se: np.ndarray
    used: np.ndarray
    slope: float
    slope_se: float
    constant: float
    constant_se: float
    excluded: np.ndarray


def ratio_analysis(h1, h2, slope_range=(0.0, 0.5), const_range=(0.5, 1.0)):
    """``R = sigma2 / sigma1^2`` per bin with slope and constant fits.

    Bins where ``sigma1 < 3 se`` are excluded from both fits.
    """
    if not np.array_equal(h1.edges, h2.edges):
        raise ValueError("histograms must share bin edges")
    s1, s2, e1, e2 = h1.sigma, h2.sigma, h1.se, h2.se
    with np.errstate(divide="ignore", invalid="ignore"):
        r = s2 / s1**2
        rel = np.sqrt((e2 / s2) ** 2 + 4.0 * (e1 / s1) ** 2)
        r_se = np.abs(r) * rel
    good = np.isfinite(r) & np.isfinite(r_se) & (s1 >= 3.0 * e1) & (s2 > 0)
    x = h1.mids
    # bin-mass weights: inverse variances estimated from the same noisy
    # ratios would pull the fits toward bins that happen to read low
    m1, m2 = h1.mass, h2.mass
    with np.errstate(divide="ignore", invalid="ignore"):
        wts = np.where(good, m1 * m2 / (m1 + m2), 0.0)
    slope, slope_se = _wls_through(x, r - 1.0, r_se, wts, good & (x > slope_range[0]) & (x <= slope_range[1]))
    const, const_se = _wls_through(np.ones_like(x), r, r_se, wts, good & (x >= const_range[0]) & (x <= const_range[1]))
    return RatioReport(x, r, r_se, good, slope, slope_se, const, const_se,
                       np.flatnonzero(~good & (h1.counts > 0)))


def _wls_through(x, y, y_se, w, sel):
    """Weighted fit ``y = b x`` on ``sel``; returns ``(b, se)``."""
    x, y, y_se, w = x[sel], y[sel], y_se[sel], w[sel]
    den = np.sum(w * x * x)
    if not den > 0:
        return float("nan"), float("nan")
    b = np.sum(w * x * y) / den
    se = np.sqrt(np.sum((w * x * y_se) ** 2)) / den
    return float(b), float(se)


# -- separability versus concurrence ---------------------------------------


def sep_vs_concurrence(system, metrics, thresholds, n_samples, *, seed=0, n_blocks=MIN_BLOCKS,
                       workers=1, chunk=DEFAULT_CHUNK):
    """``P(C = 0 | C <= C0)`` per metric and threshold ``C0``.

    Entries whose conditioning set is empty are NaN.  ``extra['ppt']`` holds
    the ordinary PPT probability of the same samples.
    """
    system = get_system(system) if isinstance(system, str) else system
    if not system.two_qubit:
        raise ValueError("sep_vs_concurrence needs a two-qubit system")
    thresholds = np.asarray(thresholds, dtype=float)
    if np.any(np.diff(thresholds) <= 0):
        raise ValueError("thresholds must be strictly ascending")
    check_compatible(system, "concurrence", metrics)
    mids = _metric_ids(metrics, system.beta)
    stream = QmcStream(system.coord_count, scramble_seed=seed)
    nt = thresholds.size

    def evaluate(start, count):
        st = sample_states(system, stream, start, count)
        c = cr.concurrence_batch(st.rho, st.u, st.spectra)
        # first threshold index with C <= C0
        k = np.searchsorted(thresholds, c, side="left")
        zero = c <= 0.0
        sep = st.pt_eigs[:, 0] >= -PSD_TOL
        tallies, counters = {}, {"rejected_states": st.rejected}
        for mid in mids:
            lw, ok = ms.log_weights(st.spectra, mid, system.n_levels, system.rank)
            counters[f"rejected_{mid.name}"] = int((~ok).sum())
            scale, w = weighted_chunk(lw)
            data = {
                "mass": np.bincount(k, weights=w, minlength=nt + 1),
                "zero": np.array([w[zero].sum()]),
                "ppt": np.array([w[sep].sum()]),
                "w": np.array([w.sum()]),
            }
            tallies[mid.name] = (scale, data, {"mass": 1, "zero": 1, "ppt": 1, "w": 1})
        return tallies, counters

    merged = run_blocks(n_samples, n_blocks, evaluate, chunk=chunk, workers=workers)
    p, se, ppt = {}, {}, {}
    for m in metrics:
        tot, blk = merged.totals[m], merged.blocks[m]
        cond = np.cumsum(tot["mass"])[:nt]
        cond_b = np.cumsum(blk["mass"], axis=1)[:, :nt]
        z, zb = tot["zero"][0], blk["zero"][:, 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            p[m] = np.where(cond > 0, z / cond, np.nan)
            se[m] = np.where(cond > 0, ratio_se(zb[:, None] * np.ones(nt), cond_b, z, cond), np.nan)
        ppt[m] = float(tot["ppt"][0] / tot["w"][0])
    counters = merged.counters
    rejected = {m: counters.get(f"rejected_{m}", 0) + counters.get("rejected_states", 0) for m in metrics}
    ess = {m: float("nan") for m in metrics}
    return CurveTable(thresholds, list(metrics), p, se, ess, system.name, "concurrence-threshold",
                      n_samples, rejected, {"ppt": ppt})
