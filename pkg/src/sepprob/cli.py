"""Command-line front end.

Subcommands: alpha-curve, esf, marginal, sep-vs-concurrence, abs-sep, oracle
and check.  Settings come from an optional INI-style ``--config`` file
(flat ``key = value`` lines; a ``[run]`` header is optional) and are
overridden by command-line flags.

Exit codes: 0 success, 1 configuration error, 2 acceptance failure, 3 I/O
error.
"""

import argparse
import configparser
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import acceptance
from . import estimator as est
from . import oracles

OUTPUT_DIR_ENV = "SEPPROB_OUTPUT_DIR"
EXIT_OK, EXIT_CONFIG, EXIT_ACCEPTANCE, EXIT_IO = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


# -- configuration -------------------------------------------------------------


def parse_range(text, name="grid"):
    """``a:b:n`` -> (a, b, n) with ``n`` the number of steps."""
    try:
        a, b, n = text.split(":")
        a, b, n = float(a), float(b), int(n)
    except ValueError:
        raise ConfigError(f"{name} must look like start:end:steps, got {text!r}") from None
    if n < 2:
        raise ConfigError(f"{name} needs at least 2 steps")
    if not b > a:
        raise ConfigError(f"{name} end must exceed its start")
    return a, b, n


@dataclass
class RunConfig:
    system: str = "2q-complex"
    constraint: str = "det"
    metrics: list = field(default_factory=lambda: ["hs"])
    n_samples: int = 100_000
    seed: int = 0
    block_count: int = est.MIN_BLOCKS
    grid: tuple = (0.0, 1.0, 1000)
    bins: int = 500
    out: str = None
    svg: str = None
    workers: int = 1
    resume: bool = False

    def validate(self, needs_constraint=True):
        if self.block_count < est.MIN_BLOCKS:
            raise ConfigError(f"--blocks must be at least {est.MIN_BLOCKS}")
        if self.n_samples <= 0 or self.n_samples % self.block_count:
            raise ConfigError("--samples must be a positive multiple of --blocks")
        if self.workers < 1:
            raise ConfigError("--workers must be positive")
        if self.grid[2] < 2:
            raise ConfigError("grid needs at least 2 steps")
        if needs_constraint:
            try:
                est.check_compatible(est.get_system(self.system), self.constraint, self.metrics,
                                     self.grid_values())
            except ValueError as exc:
                raise ConfigError(str(exc)) from None

    def grid_values(self):
        a, b, n = self.grid
        return est.default_grid(n, a, b)


_KEYS = {
    "system": str, "constraint": str, "metrics": str, "samples": int, "seed": int, "blocks": int,
    "grid": str, "bins": int, "out": str, "svg": str, "workers": int, "beta": str, "metric": str,
    "thresholds": str,
}


def read_config(path):
    """Flat key-value file; returns a dict of raw strings."""
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc}") from exc
    if not text.lstrip().startswith("["):
        text = "[run]\n" + text
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"bad config file: {exc}") from None
    out = {}
    for section in parser.sections():
        for k, v in parser.items(section):
            k = k.replace("-", "_")
            if k not in _KEYS:
                raise ConfigError(f"unknown config key {k!r}")
            out[k] = v
    return out


def _setting(args, cfg, name, default):
    v = getattr(args, name, None)
    if v is not None:
        return v
    if name in cfg:
        try:
            return _KEYS[name](cfg[name])
        except ValueError:
            raise ConfigError(f"config key {name} has a bad value {cfg[name]!r}") from None
    return default


def _output_path(path, default_name):
    base = os.environ.get(OUTPUT_DIR_ENV)
    path = path or default_name
    if base and not os.path.isabs(path):
        os.makedirs(base, exist_ok=True)
        return os.path.join(base, path)
    return path


def build_config(args, default_out):
    cfg = read_config(args.config) if getattr(args, "config", None) else {}
    metrics = _setting(args, cfg, "metrics", "hs")
    grid = _setting(args, cfg, "grid", "0:1:1000")
    rc = RunConfig(
        system=_setting(args, cfg, "system", "2q-complex"),
        constraint=_setting(args, cfg, "constraint", "det"),
        metrics=[m.strip() for m in metrics.split(",") if m.strip()],
        n_samples=_setting(args, cfg, "samples", 100_000),
        seed=_setting(args, cfg, "seed", 0),
        block_count=_setting(args, cfg, "blocks", est.MIN_BLOCKS),
        grid=parse_range(grid),
        bins=_setting(args, cfg, "bins", 500),
        out=_output_path(_setting(args, cfg, "out", None), default_out),
        svg=_setting(args, cfg, "svg", None),
        workers=_setting(args, cfg, "workers", 1),
        resume=bool(getattr(args, "resume", False)),
    )
    if rc.svg:
        rc.svg = _output_path(rc.svg, rc.svg)
    return rc, cfg


# -- emitters ----------------------------------------------------------------


def fmt(x):
    """17 significant digits, locale independent."""
    return "%.17g" % float(x)


def write_csv(path, header, rows):
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(v if isinstance(v, str) else fmt(v) for v in row) + "\n")


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def svg_plot(path, series, xlabel, ylabel, width=640, height=420):
    """Line plot of ``[(label, x, y), ...]`` as a standalone SVG file."""
    ml, mr, mt, mb = 60, 20, 20, 50
    xs = np.concatenate([np.asarray(s[1], float) for s in series])
    ys = np.concatenate([np.asarray(s[2], float) for s in series])
    fin = np.isfinite(ys)
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = (float(ys[fin].min()), float(ys[fin].max())) if fin.any() else (0.0, 1.0)
    if y1 <= y0:
        y1 = y0 + 1.0
    pw, ph = width - ml - mr, height - mt - mb

    def px(x):
        return ml + (x - x0) / (x1 - x0) * pw

    def py(y):
        return mt + (1.0 - (y - y0) / (y1 - y0)) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="11">',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for k in range(5):
        tx = x0 + (x1 - x0) * k / 4
        ty = y0 + (y1 - y0) * k / 4
        out.append(f'<text x="{px(tx):.1f}" y="{height - mb + 15}" text-anchor="middle">{tx:.3g}</text>')
        out.append(f'<text x="{ml - 5}" y="{py(ty) + 4:.1f}" text-anchor="end">{ty:.3g}</text>')
    out.append(f'<text x="{ml + pw / 2}" y="{height - 10}" text-anchor="middle">{xlabel}</text>')
    out.append(f'<text x="15" y="{mt + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 15 {mt + ph / 2})">{ylabel}</text>')
    for i, (label, x, y) in enumerate(series):
        color = _COLORS[i % len(_COLORS)]
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y) if np.isfinite(b))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{pts}"/>')
        ly = mt + 15 + 15 * i
        out.append(f'<line x1="{ml + pw - 110}" y1="{ly - 4}" x2="{ml + pw - 90}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{ml + pw - 85}" y="{ly}">{label}</text>')
    out.append("</svg>")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(out) + "\n")


def _progress(msg):
    print(msg, file=sys.stderr)


# -- subcommands -------------------------------------------------------------


def run_alpha_curve(rc, stop_after=None):
    """Estimate the alpha curve and write CSV (and SVG); returns the table."""
    rc.validate()
    grid = rc.grid_values()
    ckpt = rc.out + ".ckpt" if rc.resume else None
    table = est.alpha_curve(rc.system, rc.constraint, rc.metrics, rc.n_samples, grid, seed=rc.seed,
                            n_blocks=rc.block_count, workers=rc.workers, checkpoint=ckpt,
                            stop_after=stop_after)
    if table is None:
        _progress(f"stopped early; resume with the same flags and --resume ({ckpt})")
        return None
    header = ["alpha"]
    for m in rc.metrics:
        header += [f"p_{m}", f"se_{m}", f"ess_{m}"]
    rows = []
    for i, a in enumerate(grid):
        row = [a]
        for m in rc.metrics:
            row += [table.p[m][i], table.se[m][i], table.ess[m]]
        rows.append(row)
    write_csv(rc.out, header, rows)
    if rc.svg:
        svg_plot(rc.svg, [(m, grid, table.p[m]) for m in rc.metrics], "alpha", "probability")
    if ckpt and os.path.exists(ckpt):
        os.remove(ckpt)
    return table


def run_esf(rc, systems, width=0.1):
    """ESF histogram per system; a real/complex pair also gets ratio columns."""
    rc.validate(needs_constraint=False)
    hists = []
    for name in systems:
        s = est.get_system(name)
        hists.append(est.esf_histogram(s, None, rc.bins, rc.n_samples, seed=rc.seed,
                                       n_blocks=rc.block_count, workers=rc.workers))
    h0 = hists[0]
    header = ["c_lo", "c_hi"]
    cols = [h0.edges[:-1], h0.edges[1:]]
    for name, h in zip(systems, hists):
        header += [f"sigma_{name}", f"se_{name}", f"weight_{name}", f"count_{name}"]
        cols += [h.sigma, h.se, h.weight / h.weight.sum(), h.counts]
    ratio = None
    betas = sorted(h.beta for h in hists)
    if len(hists) == 2 and betas == [1, 2]:
        h1, h2 = (hists[0], hists[1]) if hists[0].beta == 1 else (hists[1], hists[0])
        ratio = est.ratio_analysis(h1, h2)
        header += ["ratio", "ratio_se"]
        cols += [ratio.ratio, ratio.se]
    write_csv(rc.out, header, list(zip(*cols)))
    lines = []
    for name, h in zip(systems, hists):
        s = est.get_system(name)
        if s.two_qubit and s.full_rank:
            j = est.jump_detect(h, 0.5, width)
            lines.append(f"jump {name} at 1/2: {fmt(j.jump)} se {fmt(j.se)} "
                         f"(left {fmt(j.left)}, right {fmt(j.right)})")
    if ratio is not None:
        lines.append(f"ratio slope on (0, 1/2]: {fmt(ratio.slope)} se {fmt(ratio.slope_se)}")
        lines.append(f"ratio constant on [1/2, 1]: {fmt(ratio.constant)} se {fmt(ratio.constant_se)}")
    if lines:
        with open(rc.out + ".report.txt", "w", encoding="ascii") as fh:
            fh.write("\n".join(lines) + "\n")
        for line in lines:
            print(line)
    if rc.svg:
        series = [(n, h.mids, h.sigma) for n, h in zip(systems, hists)]
        svg_plot(rc.svg, series, "C_max", "separable fraction")
    return hists, ratio


def run_marginal(rc, beta, metric):
    rc.validate(needs_constraint=False)
    h = est.marginal_histogram(rc.system, beta, metric, rc.bins, rc.n_samples, seed=rc.seed,
                               n_blocks=rc.block_count, workers=rc.workers)
    rows = zip(h.edges[:-1], h.edges[1:], h.density, h.se, h.mass)
    write_csv(rc.out, ["lo", "hi", "density", "se", "mass"], rows)
    if rc.svg:
        svg_plot(rc.svg, [(f"{metric} beta={beta}", 0.5 * (h.edges[:-1] + h.edges[1:]), h.density)],
                 h.variable, "density")
    print(f"mean {fmt(h.mean)} se {fmt(h.mean_se)} ess {fmt(h.ess)}")
    return h


def run_sep_vs_concurrence(rc, thresholds):
    rc.validate(needs_constraint=False)
    t = est.sep_vs_concurrence(rc.system, rc.metrics, thresholds, rc.n_samples, seed=rc.seed,
                               n_blocks=rc.block_count, workers=rc.workers)
    header = ["c0"]
    for m in rc.metrics:
        header += [f"p_{m}", f"se_{m}"]
    rows = []
    for i, c0 in enumerate(thresholds):
        row = [c0]
        for m in rc.metrics:
            row += [t.p[m][i], t.se[m][i]]
        rows.append(row)
    write_csv(rc.out, header, rows)
    if rc.svg:
        svg_plot(rc.svg, [(m, thresholds, t.p[m]) for m in rc.metrics], "C0", "P(C = 0 | C <= C0)")
    return t


def run_abs_sep(rc, beta, metric):
    rc.validate(needs_constraint=False)
    e = est.absolute_separability_probability(beta, metric, rc.n_samples, system=rc.system, seed=rc.seed,
                                              n_blocks=rc.block_count, workers=rc.workers)
    write_csv(rc.out, ["beta", "metric", "p", "se", "ess", "n"],
              [[beta, metric, e.value, e.se, e.ess, e.n_samples]])
    print(f"P(C_max = 0) = {fmt(e.value)} se {fmt(e.se)} ess {fmt(e.ess)}")
    return e


def run_oracle(words, out=print):
    """Registry and oracle queries; ``words`` as typed after ``oracle``."""
    if not words or words[0] == "all":
        for cid, text, value, prov in oracles.registry_table():
            out(f"{cid}\t{text}\t{fmt(value)}\t{prov}")
        return
    head = words[0]
    if head == "verify":
        if len(words) < 2:
            raise ConfigError(f"verify needs an identity id: {', '.join(oracles.IDENTITIES)}")
        r = oracles.verify_identity(words[1], sigma=_named_sigma(words[2] if len(words) > 2 else None))
        out(f"{r.id}: rhs {fmt(r.rhs)} target {fmt(r.target)} deviation {fmt(r.deviation)} "
            f"error {fmt(r.error_estimate)} converged {r.converged}")
        return
    if head == "beta_fit":
        p, q = oracles.beta_fit_params(int(words[1]))
        out(f"p = {p} = {fmt(p)}\tq = {q} = {fmt(q)}")
        return
    if head == "fit":
        name, alpha = words[1], float(words[2])
        out(fmt(oracles.fit_curve(name, alpha)))
        return
    if head == "marg":
        beta, c = int(words[1]), float(words[2])
        out(fmt(oracles.marg_rank3(c, beta)))
        return
    c = oracles.constant(head)
    out(f"{c.id}\t{c.expression_text}\t{fmt(c.float_value)}\t{c.provenance}")
    if c.quoted is not None:
        out(f"quoted {c.quoted} ({'matches' if c.matches_quoted() else 'does not match'})")
    if c.note:
        out(f"note: {c.note}")


def _named_sigma(name):
    """Separability functions for the eigenvalue identities, by name."""
    if name is None or name == "zero":
        return lambda c: np.zeros_like(c)
    if name == "one":
        return lambda c: np.ones_like(c)
    if name in ("dyson2", "dyson1"):
        beta = int(name[-1])
        m = oracles.dyson_model("rank4", beta)
        # the half-range model, continued by the lower-half pattern below 1/2
        p = oracles.dyson_model("rank4_pattern", beta)
        return np.vectorize(lambda c: 1.0 if c <= 0.0 else (
            oracles.dyson_sigma(m, c) if c >= 0.5 else oracles.dyson_sigma(p, c)))
    raise ConfigError("sigma must be one of zero, one, dyson1, dyson2")


def run_check(level, subset=None, samples=None, workers=1, json_path=None):
    results = acceptance.run_check(level, subset, samples, workers)
    print(acceptance.summary_table(results))
    if json_path:
        with open(json_path, "w", encoding="ascii") as fh:
            fh.write(acceptance.summary_json(results, level) + "\n")
    return EXIT_OK if all(r.passed for r in results) else EXIT_ACCEPTANCE


# -- argument parsing --------------------------------------------------------


def _common(p, constraint=False, metrics=True, grid=False, bins=False):
    p.add_argument("--config", help="INI-style key = value file; flags override it")
    p.add_argument("--system")
    if constraint:
        p.add_argument("--constraint")
    if metrics:
        p.add_argument("--metrics", help="comma-separated: hs,bures,wy,km")
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--blocks", type=int)
    if grid:
        p.add_argument("--grid", help="start:end:steps")
    if bins:
        p.add_argument("--bins", type=int)
    p.add_argument("--out")
    p.add_argument("--svg")
    p.add_argument("--workers", type=int)


def build_parser():
    ap = argparse.ArgumentParser(prog="sepprob", description="Separability probability estimators")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("alpha-curve", help="feasibility probability over an alpha grid")
    _common(p, constraint=True, grid=True)
    p.add_argument("--resume", action="store_true", help="checkpoint to OUT.ckpt and resume from it")
    p.add_argument("--stop-after", type=int, help=argparse.SUPPRESS)

    p = sub.add_parser("esf", help="separable fraction per maximal-concurrence bin")
    _common(p, metrics=False, bins=True)

    p = sub.add_parser("marginal", help="histogram of the maximal concurrence")
    _common(p, metrics=False, bins=True)
    p.add_argument("--beta", type=int)
    p.add_argument("--metric")

    p = sub.add_parser("sep-vs-concurrence", help="P(C = 0 | C <= C0)")
    _common(p)
    p.add_argument("--thresholds", help="start:end:steps")

    p = sub.add_parser("abs-sep", help="absolute separability probability")
    _common(p, metrics=False)
    p.add_argument("--beta", type=int)
    p.add_argument("--metric")

    p = sub.add_parser("oracle", help="closed-form constants and identity checks")
    p.add_argument("words", nargs="*", help="all | ID | verify ID [sigma] | beta_fit B | fit NAME A | marg B C")

    p = sub.add_parser("check", help="run the acceptance suite")
    p.add_argument("--level", choices=acceptance.LEVELS, default="smoke")
    p.add_argument("--subset", help="criterion numbers or oracle/invariants/qmc, comma-separated")
    p.add_argument("--samples", type=int, help="override every criterion's sample size")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--json", help="write a machine-readable summary here")
    return ap


def _dispatch(args):
    cmd = args.command
    if cmd == "oracle":
        run_oracle(args.words)
        return EXIT_OK
    if cmd == "check":
        return run_check(args.level, args.subset, args.samples, args.workers, args.json)
    rc, cfg = build_config(args, f"{cmd}.csv")
    if cmd == "alpha-curve":
        run_alpha_curve(rc, stop_after=args.stop_after)
        return EXIT_OK
    if cmd == "esf":
        systems = [s.strip() for s in rc.system.split(",")]
        for s in systems:
            try:
                est.get_system(s)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        run_esf(rc, systems)
        return EXIT_OK
    if cmd in ("marginal", "abs-sep"):
        sysobj = est.get_system(rc.system)
        beta_raw = _setting(args, cfg, "beta", None)
        beta = int(beta_raw) if beta_raw is not None else sysobj.beta
        metric = _setting(args, cfg, "metric", "hs")
        if cmd == "marginal":
            run_marginal(rc, beta, metric)
        else:
            run_abs_sep(rc, beta, metric)
        return EXIT_OK
    if cmd == "sep-vs-concurrence":
        a, b, n = parse_range(_setting(args, cfg, "thresholds", "0.02:1:49"), "thresholds")
        run_sep_vs_concurrence(rc, est.default_grid(n, a, b))
        return EXIT_OK
    raise ConfigError(f"unknown command {cmd}")


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return _dispatch(args)
    except (ConfigError, acceptance.AcceptanceConfigError, oracles.UnknownConstant) as exc:
        print(f"error: {exc.args[0] if exc.args else exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
