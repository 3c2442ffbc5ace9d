"""Command-line experiment runner.

    btls run --suite exit_laws --seed 1 --step 1e-3 --n 10000 --out runs/exit

Every suite writes ``report.json`` (verdicts, estimates, config echo) and its
CSV artifacts into ``--out``.  The exit status is 0 only if every verdict in
the report passes.  Values of ``a`` and ``b`` may be written in units of
lambda, e.g. ``lambda``, ``2lambda`` or ``lambda/2``.
"""

from __future__ import annotations

import argparse
import json
import math
import re
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import LAMBDA, __version__
from .errors import InvalidArgument, NoSuchBTLS
from .harness import ExitLawOracle, Estimate, Verdict, ks_2samp, ks_test

SUITES = ("exit_laws", "cle_point", "cle_decay", "tvs_laws", "tvs_geometric",
          "coupling_identities", "dgff_checks", "carpet")
FIGURES = ("carpet_raster", "loglog_decay", "exit_histogram")


class ArtifactNotFound(LookupError):
    pass


class UsageError(InvalidArgument):
    pass


# ---------------------------------------------------------------------------
# parsing helpers

_LAM = re.compile(r"^\s*([0-9.eE+-]*)\s*\*?\s*(?:lambda|lam|λ)\s*(?:/\s*([0-9.eE+-]+))?\s*$")


def parse_level(text) -> float:
    """A real number, optionally in units of lambda ("2lambda", "lambda/2")."""
    if isinstance(text, (int, float)):
        return float(text)
    m = _LAM.match(str(text))
    if m:
        k = float(m.group(1)) if m.group(1) not in ("", "+") else 1.0
        d = float(m.group(2)) if m.group(2) else 1.0
        return k * LAMBDA / d
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number or multiple of lambda: {text!r}")


def _int_list(text):
    return [int(x) for x in str(text).split(",") if x.strip()]


def _float_list(text):
    return [float(x) for x in str(text).split(",") if x.strip()]


def _pairs(text):
    """'a:b,a:b' -> [(a, b), ...] with lambda units allowed."""
    out = []
    for item in str(text).split(","):
        if not item.strip():
            continue
        a, _, b = item.partition(":")
        out.append((parse_level(a), parse_level(b)))
    return out


def read_config(path) -> dict:
    """key = value lines; '#' starts a comment; keys use - or _ freely."""
    cfg = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key = value")
        k, v = line.split("=", 1)
        cfg[k.strip().replace("-", "_")] = v.strip()
    return cfg


# ---------------------------------------------------------------------------
# config and report

@dataclass
class ExperimentConfig:
    suite: str
    master_seed: int = 0
    step: float | None = None
    n_replicas: int | None = None
    params: dict = field(default_factory=dict)

    def echo(self) -> dict:
        d = {"suite": self.suite, "master_seed": self.master_seed, "step": self.step,
             "n_replicas": self.n_replicas}
        d.update({k: _jsonable(v) for k, v in sorted(self.params.items())})
        return d


@dataclass
class RunReport:
    config: ExperimentConfig
    verdicts: list = field(default_factory=list)
    estimates: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)
    runtime: float = 0.0
    out_dir: Path | None = None

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def add(self, v: Verdict):
        if any(x.test == v.test for x in self.verdicts):
            raise InvalidArgument(f"duplicate test {v.test}")
        self.verdicts.append(v)

    def to_dict(self) -> dict:
        return {"version": __version__, "config": self.config.echo(),
                "verdicts": [v.to_dict() for v in self.verdicts],
                "estimates": {k: _jsonable(v) for k, v in sorted(self.estimates.items())},
                "artifacts": dict(sorted(self.artifacts.items())),
                "passed": self.passed, "runtime_seconds": round(self.runtime, 3)}


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


def _write_csv(path: Path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(_fmt(x) for x in r) + "\n")


def _fmt(x):
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


# ---------------------------------------------------------------------------
# suites

def _label_verdict(name, lower, n, p):
    est = Estimate.from_bernoulli(int(lower), n)
    z = est.z_score(p)
    return Verdict(name, z, None, abs(z) <= 3.0, {"empirical": est.mean, "expected": p, "n": n})


def _suite_exit_laws(cfg: ExperimentConfig, rep: RunReport, out: Path):
    from .paths import exit_batch

    step = cfg.step or 1e-3
    n = cfg.n_replicas or 10_000
    rows = []
    hist = []
    for i, (lo, hi) in enumerate([(-math.pi, math.pi), (-math.pi / 2, math.pi / 2)]):
        b = exit_batch(cfg.master_seed, f"exit_laws/{i}", n, step, (lo, hi))
        o = ExitLawOracle(lo, hi)
        d, p = ks_test(b.times, o.cdf)
        tag = f"({lo:.4f},{hi:.4f})"
        rep.add(Verdict(f"ks_exit_time{tag}", d, p, p > 0.01, {"n": n}))
        rep.add(_label_verdict(f"exit_side{tag}", np.sum(~b.upper), n, 0.5))
        rep.estimates[f"mean_exit_time{tag}"] = float(b.times.mean())
        rep.estimates[f"oracle_mean{tag}"] = o.mean()
        rows.extend((i, k, t, int(u)) for k, (t, u) in enumerate(zip(b.times, b.upper)))
        edges = np.linspace(0.0, float(np.quantile(b.times, 0.999)) * 1.01, 41)
        edges[-1] = max(edges[-1], float(b.times.max()) + 1e-12)
        c, _ = np.histogram(b.times, edges)
        hist.extend((i, edges[j], edges[j + 1], int(c[j])) for j in range(c.size))
    _write_csv(out / "exit_times.csv", ["interval", "replica", "time", "upper"], rows)
    _write_csv(out / "exit_histogram.csv", ["interval", "left", "right", "count"], hist)
    rep.artifacts["exit_times"] = "exit_times.csv"
    rep.artifacts["exit_histogram"] = "exit_histogram.csv"


def _suite_cle_point(cfg, rep, out):
    from .cle import sample_cle_batch, sample_cle_geometric

    step = cfg.step or 1e-3
    n = cfg.n_replicas or 10_000
    rows = []
    for M in cfg.params.get("M", [1, 2]):
        b = sample_cle_batch(cfg.master_seed, n, M, step)
        o = ExitLawOracle(-M * math.pi, M * math.pi)
        d, p = ks_test(b.log_crad_drop, o.cdf)
        rep.add(Verdict(f"ks_log_crad_drop_M{M}", d, p, p > 0.01, {"n": n}))
        rep.add(_label_verdict(f"label_law_M{M}", np.sum(b.label < 0), n, 0.5))
        rows.extend((M, k, "reduced", l, t) for k, (l, t) in enumerate(zip(b.label, b.log_crad_drop)))
        ng = int(cfg.params.get("geometric_n", 0))
        if ng:
            g = sample_cle_geometric(cfg.master_seed, ng, M, step)
            ref = sample_cle_batch(cfg.master_seed, ng, M, step, stream="cle-geo-ref")
            d2, p2 = ks_2samp(g.signed, ref.signed)
            rep.add(Verdict(f"ks2_geometric_vs_reduced_M{M}", d2, p2, p2 > 0.01, {"n": ng}))
            rows.extend((M, k, "geometric", l, t) for k, (l, t) in enumerate(zip(g.label, g.log_crad_drop)))
    _write_csv(out / "cle_point.csv", ["M", "replica", "mode", "label", "log_crad_drop"], rows)
    rep.artifacts["cle_point"] = "cle_point.csv"


_DECAY_TOL = {1: 0.02, 2: 0.01}


def _suite_cle_decay(cfg, rep, out):
    from .cle import one_point_decay
    from .tvs import decay_exponent, validate

    n = cfg.n_replicas or 10 ** 6
    rg = cfg.params.get("r_grid")
    first = None
    for M in cfg.params.get("M", [1, 2]):
        res = one_point_decay(M, rg, n, cfg.step, cfg.master_seed)
        target = 1.0 / (8 * M * M)
        tol = _DECAY_TOL.get(M, 0.25 * target)
        rep.add(Verdict(f"decay_exponent_M{M}", res.exponent, None,
                        abs(res.exponent - target) <= tol,
                        {"target": target, "tol": tol, "stderr": res.stderr,
                         "window_points": int(res.window.sum())}))
        name = f"decay_M{M}.csv"
        _write_csv(out / name, ["r", "p", "hits", "in_window"],
                   zip(res.r_grid, res.probabilities, res.hits, res.window))
        rep.artifacts[f"decay_M{M}"] = name
        first = first or name
    for a, b in cfg.params.get("tvs", [(LAMBDA, LAMBDA)]):
        spec = validate(a, b)
        res = decay_exponent(spec, rg, n, cfg.step, cfg.master_seed)
        target = spec.exponent
        tol = 0.1 * target
        tag = f"({a / LAMBDA:g}l,{b / LAMBDA:g}l)"
        rep.add(Verdict(f"decay_exponent_tvs{tag}", res.exponent, None,
                        abs(res.exponent - target) <= tol,
                        {"target": target, "tol": tol, "stderr": res.stderr}))
        name = f"decay_tvs_{a / LAMBDA:g}_{b / LAMBDA:g}.csv"
        _write_csv(out / name, ["r", "p", "hits", "in_window"],
                   zip(res.r_grid, res.probabilities, res.hits, res.window))
        rep.artifacts[f"decay_tvs{tag}"] = name
        first = first or name
    if first:
        rep.artifacts["loglog_decay"] = first


DEFAULT_TVS_GRID = [(LAMBDA, LAMBDA), (LAMBDA, 2 * LAMBDA), (2 * LAMBDA, 2 * LAMBDA),
                    (LAMBDA / 2, 2 * LAMBDA)]


def _suite_tvs_laws(cfg, rep, out):
    from .tvs import nested_batch, sample_values, validate

    step = cfg.step or 1e-3
    n = cfg.n_replicas or 10_000
    specs = cfg.params.get("specs") or DEFAULT_TVS_GRID
    rows = []
    for a, b in specs:
        spec = validate(a, b)
        tag = f"({a / LAMBDA:g}l,{b / LAMBDA:g}l)"
        if spec.trivial:
            rep.add(Verdict(f"trivial{tag}", 0.0, None, True, {}))
            continue
        vb = sample_values(cfg.master_seed, spec, n, step)
        lower = int(np.sum(vb.label < 0))
        rep.add(_label_verdict(f"label_law{tag}", lower, n, spec.p_lower))
        d, p = ks_test(vb.log_crad_drop, spec.oracle().cdf)
        rep.add(Verdict(f"ks_log_crad_drop{tag}", d, p, p > 0.01, {"n": n}))
        est = Estimate.from_samples(vb.label)
        rep.add(Verdict(f"zero_mean{tag}", est.z_score(0.0), None, est.within(0.0),
                        {"mean_label": est.mean}))
        rows.extend((a, b, k, "reduced", l, t, 0) for k, (l, t) in enumerate(zip(vb.label, vb.log_crad_drop)))
    inner = validate(*cfg.params.get("inner", (LAMBDA, LAMBDA)))
    outer = validate(*cfg.params.get("outer", (2 * LAMBDA, 2 * LAMBDA)))
    ib, ob = nested_batch(cfg.master_seed, inner, outer, n, step)
    mono = float(np.mean(ib.log_crad_drop <= ob.log_crad_drop))
    rep.add(Verdict("nested_monotone", mono, None, mono == 1.0, {"n": n}))
    rep.add(_label_verdict("nested_outer_label_law", int(np.sum(ob.label < 0)), n, outer.p_lower))
    _write_csv(out / "tvs_laws.csv", ["a", "b", "replica", "mode", "label", "log_crad_drop", "truncated"], rows)
    rep.artifacts["tvs_laws"] = "tvs_laws.csv"


def _suite_tvs_geometric(cfg, rep, out):
    from .tvs import censored_signed, martingale_stats, sample_geometric, sample_values, validate

    step = cfg.step or 1e-3
    n = cfg.n_replicas or 500
    delta = float(cfg.params.get("delta", 1e-3))
    a, b = cfg.params.get("a", LAMBDA), cfg.params.get("b", LAMBDA)
    spec = validate(a, b)
    t_cut = math.log(1.0 / delta)
    g = sample_geometric(cfg.master_seed, spec, n, delta, step)
    r = sample_values(cfg.master_seed, spec, n, step, stream="tvs-geo-ref", max_time=t_cut)
    d, p = ks_2samp(g.censored_signed(t_cut),
                    censored_signed(r.label, r.log_crad_drop, r.exited, t_cut))
    tag = f"({a / LAMBDA:g}l,{b / LAMBDA:g}l)"
    rep.add(Verdict(f"ks2_geometric_vs_reduced{tag}", d, p, p > 0.01, {"n": n, "t_cut": t_cut}))
    tf = g.truncation_fraction
    rep.add(Verdict(f"truncation_fraction{tag}", tf, None, tf < 0.02,
                    {"delta": delta, "oracle_tail": spec.oracle().survival(t_cut)}))
    ok = ~g.truncated
    rep.add(_label_verdict(f"geometric_label_law{tag}", int(np.sum(g.label[ok] < 0)),
                           int(ok.sum()), spec.p_lower))
    ms = martingale_stats(g.builds)
    rep.add(Verdict("martingale_drift", ms["drift"] / ms["drift_se"], None,
                    abs(ms["drift"]) <= 3 * ms["drift_se"], ms))
    rel = ms["variance_rate"] / ms["target_rate"] - 1.0
    rep.add(Verdict("martingale_variance", rel, None, abs(rel) <= 0.10, {}))
    if abs(spec.a + spec.b - 2 * LAMBDA) < 1e-9:
        rep.add(Verdict("neighbouring_labels_2lambda", ms["max_gap_error"], None,
                        ms["max_gap_error"] < 1e-9, {}))
    rows = [(k, a, b, "geometric", l, t, int(tr)) for k, (l, t, tr) in
            enumerate(zip(g.label, g.log_crad_drop, g.truncated))]
    if int(cfg.params.get("cle_n", 0)):
        from .cle import sample_cle_batch, sample_cle_geometric

        m = int(cfg.params["cle_n"])
        cg = sample_cle_geometric(cfg.master_seed, m, 1, step)
        cr = sample_cle_batch(cfg.master_seed, m, 1, step, stream="cle-geo-ref")
        d2, p2 = ks_2samp(cg.signed, cr.signed)
        rep.add(Verdict("ks2_geometric_vs_reduced_cle_M1", d2, p2, p2 > 0.01, {"n": m}))
    ds = int(cfg.params.get("dimension_steps", 0))
    if ds:
        from .sle import level_line_trace, trace_dimension

        tr = level_line_trace(np.random.default_rng(cfg.master_seed), ds)
        dim, sc, cnt = trace_dimension(tr)
        rep.add(Verdict("level_line_dimension", dim, None, abs(dim - 1.5) <= 0.15,
                        {"n_steps": ds}))
        _write_csv(out / "level_line_boxes.csv", ["scale", "count"], zip(sc, cnt))
        rep.artifacts["level_line_boxes"] = "level_line_boxes.csv"
    _write_csv(out / "tvs_geometric.csv", ["replica", "a", "b", "mode", "label", "log_crad_drop",
                                           "truncated"], rows)
    rep.artifacts["tvs_geometric"] = "tvs_geometric.csv"


def _suite_coupling(cfg, rep, out):
    from .seeding import derive
    from .sle import Fixed, cross_variation_check, radial_sle42
    from .loewner import hadamard_residuals

    step = cfg.step or 1e-4
    n = cfg.n_replicas or 5
    z, w = 0.2 + 0.1j, -0.1 - 0.2j
    worst = 0.0
    for k in range(n):
        drv = radial_sle42(np.random.default_rng(derive(cfg.master_seed, "hadamard", k)), step,
                           horizon_rule=Fixed(0.3))
        fd, pred = hadamard_residuals(drv.chain(), z, w)
        worst = max(worst, float(np.max(np.abs(fd - pred) / np.abs(pred))))
    rep.add(Verdict("hadamard_relative_error", worst, None, worst < 1e-2, {"drivers": n}))
    cv = cross_variation_check(cfg.master_seed, z, w, n_drivers=max(n, 1) * 4, step=step)
    rep.add(Verdict("cross_variation_vs_kernel", cv["rel_err_kernel"], None,
                    cv["rel_err_kernel"] < 0.02, cv))
    rep.add(Verdict("cross_variation_vs_green", cv["rel_err_green"], None,
                    cv["rel_err_green"] < 0.05, {}))


def _suite_dgff(cfg, rep, out):
    from . import dgff

    n = cfg.n_replicas or 10_000
    size = int(cfg.params.get("lattice", 32))
    S = dgff.LatticeDomain.square(size)
    GS = dgff.green_operator(S)
    c = (size + 1) // 2
    sets = {
        "single_vertex": [S.index((c, c))],
        "cross": [k for k, (i, j) in enumerate(S.interior) if i == c or j == c],
        "block": [k for k, (i, j) in enumerate(S.interior)
                  if 3 <= i <= size // 3 and 3 <= j <= size // 2],
    }
    for name, A in sets.items():
        v = dgff.local_set_decomposition_check(cfg.master_seed, S, A, min(n, 10_000), GS)
        v.test = f"{v.test}:{name}"
        rep.add(v)
    E = dgff.LatticeDomain.square(8)
    i, j = E.interior[:, 0], E.interior[:, 1]
    F = np.sin(np.pi * i / 9) * np.sin(np.pi * j / 9)
    F *= 0.9 / math.sqrt(dgff.dirichlet_form(E, F))
    rep.add(dgff.cameron_martin_check(cfg.master_seed, E, F, np.ones(E.n) / 8.0, n))
    D = dgff.LatticeDomain.disc(64)
    mx, mean = dgff.green_vs_continuum(D, min_sep=8, n_pairs=400, seed=cfg.master_seed)
    rep.add(Verdict("green_vs_continuum_disc64", mx, None, mx < 0.05, {"mean_rel_err": mean}))
    rep.add(dgff.mahalanobis_check(cfg.master_seed, dgff.green_operator(E)))


def _suite_carpet(cfg, rep, out):
    from .cle import carpet_raster

    res = int(cfg.params.get("resolution", 64))
    M = int((cfg.params.get("M") or [1])[0])
    cr = carpet_raster(np.random.default_rng(cfg.master_seed), M, res, step=cfg.step or 1e-3)
    frac = cr.in_hull_fraction
    rep.estimates["in_hull_fraction"] = frac
    rep.add(Verdict("carpet_raster_nondegenerate", frac, None, 0.0 < frac < 1.0,
                    {"resolution": res, "M": M}))
    code = np.where(cr.outside, 2, np.where(cr.in_hull, 1, 0))
    np.savetxt(out / "carpet.csv", code, fmt="%d", delimiter=",")
    cr.to_pgm(out / "carpet.pgm")
    rep.artifacts["carpet_raster"] = "carpet.csv"
    rep.artifacts["carpet_image"] = "carpet.pgm"


_DISPATCH = {
    "exit_laws": _suite_exit_laws,
    "cle_point": _suite_cle_point,
    "cle_decay": _suite_cle_decay,
    "tvs_laws": _suite_tvs_laws,
    "tvs_geometric": _suite_tvs_geometric,
    "coupling_identities": _suite_coupling,
    "dgff_checks": _suite_dgff,
    "carpet": _suite_carpet,
}


def validate_config(cfg: ExperimentConfig):
    from .tvs import validate

    if cfg.suite not in SUITES:
        raise UsageError(f"unknown suite {cfg.suite!r}; choose from {', '.join(SUITES)}")
    if cfg.step is not None and not cfg.step > 0:
        raise UsageError("step must be positive")
    if cfg.n_replicas is not None and cfg.n_replicas < 1:
        raise UsageError("n must be >= 1")
    if not 0 <= cfg.master_seed < 2 ** 64:
        raise UsageError("seed must be an unsigned 64-bit integer")
    p = cfg.params
    for M in p.get("M") or []:
        if M < 1:
            raise UsageError("M must be a positive integer")
    if "delta" in p and not float(p["delta"]) > 0:
        raise UsageError("delta must be positive")
    pairs = list(p.get("specs") or [])
    if cfg.suite == "tvs_geometric" or "a" in p or "b" in p:
        pairs.append((p.get("a", LAMBDA), p.get("b", LAMBDA)))
    pairs += [p[k] for k in ("inner", "outer") if k in p] + list(p.get("tvs") or [])
    for a, b in pairs:
        try:
            validate(a, b)
        except NoSuchBTLS as exc:
            raise UsageError(str(exc)) from exc
    if cfg.suite == "tvs_geometric" and validate(p.get("a", LAMBDA), p.get("b", LAMBDA)).trivial:
        raise UsageError("tvs_geometric needs a, b > 0")


def run(cfg: ExperimentConfig, out_dir) -> RunReport:
    validate_config(cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rep = RunReport(cfg, out_dir=out)
    t0 = time.perf_counter()
    _DISPATCH[cfg.suite](cfg, rep, out)
    rep.runtime = time.perf_counter() - t0
    (out / "report.json").write_text(json.dumps(rep.to_dict(), indent=2, sort_keys=True) + "\n")
    rep.artifacts["report"] = "report.json"
    return rep


def emit_figure_data(report, kind: str, out_dir=None) -> Path:
    """Plain-text plotting data derived from a finished report.

    carpet_raster: the resolution x resolution cell matrix (0 alive, 1 in hull,
    2 outside the disc); loglog_decay: columns r, P(crad < r); exit_histogram:
    columns left, right, count for the first interval of an exit_laws run.
    """
    if kind not in FIGURES:
        raise InvalidArgument(f"unknown figure kind {kind!r}")
    if isinstance(report, RunReport):
        arts, base = report.artifacts, report.out_dir
    else:
        arts, base = report["artifacts"], None
    base = Path(out_dir) if out_dir is not None else base
    if base is None:
        raise InvalidArgument("out_dir needed for a report loaded from JSON")
    if kind not in arts:
        raise ArtifactNotFound(f"report has no {kind} artifact")
    src = base / arts[kind]
    dst = base / f"figure_{kind}.txt"
    if kind == "carpet_raster":
        m = np.loadtxt(src, delimiter=",", dtype=int)
        np.savetxt(dst, m, fmt="%d")
    elif kind == "loglog_decay":
        d = np.loadtxt(src, delimiter=",", skiprows=1, ndmin=2)
        np.savetxt(dst, d[:, :2], header="r p", comments="")
    else:
        d = np.loadtxt(src, delimiter=",", skiprows=1, ndmin=2)
        d = d[d[:, 0] == d[0, 0]]
        np.savetxt(dst, d[:, 1:], fmt=["%.10g", "%.10g", "%d"], header="left right count",
                   comments="")
    return dst


# ---------------------------------------------------------------------------
# argparse front end

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="btls", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one experiment suite")
    r.add_argument("--suite", choices=SUITES, required=False, default=None,
                   help="experiment suite (required here or in --config)")
    r.add_argument("--seed", type=int, default=None, help="master seed (u64, default 0)")
    r.add_argument("--step", type=float, default=None,
                   help="time step (suite default: 1e-3, 1e-4 for coupling_identities, "
                        "1e-3*L^2 for decay fits)")
    r.add_argument("--n", type=int, default=None,
                   help="replicas (suite default: 10^4; 10^6 cle_decay; 500 tvs_geometric; "
                        "5 drivers coupling_identities)")
    r.add_argument("--out", default="btls-out", help="output directory (btls-out)")
    r.add_argument("--config", default=None, help="key = value file; command line wins")
    r.add_argument("--M", type=_int_list, default=None, help="nesting levels, e.g. 1,2")
    r.add_argument("--a", type=parse_level, default=None, help="lower value magnitude a")
    r.add_argument("--b", type=parse_level, default=None, help="upper value b")
    r.add_argument("--specs", type=_pairs, default=None,
                   help="tvs_laws grid as a:b pairs, e.g. lambda:lambda,lambda:2lambda")
    r.add_argument("--delta", type=float, default=None, help="geometric truncation radius (1e-3)")
    r.add_argument("--r-grid", type=_float_list, default=None, help="decreasing radii for decay fits")
    r.add_argument("--tvs", type=_pairs, default=None,
                   help="cle_decay: also fit these A(-a,b) (default lambda:lambda)")
    r.add_argument("--lattice", type=int, default=None, help="dgff square lattice size (32)")
    r.add_argument("--resolution", type=int, default=None, help="carpet raster resolution (64)")
    r.add_argument("--geometric-n", type=int, default=None,
                   help="cle_point: also run this many geometric explorations")
    r.add_argument("--cle-n", type=int, default=None,
                   help="tvs_geometric: geometric vs reduced CLE(4) replicas")
    r.add_argument("--dimension-steps", type=int, default=None,
                   help="tvs_geometric: Loewner steps of a level-line trace for box counting")
    r.add_argument("--emit", action="append", choices=FIGURES, default=[],
                   help="write figure data after the run (repeatable)")
    return p


_PARAM_KEYS = ("M", "a", "b", "specs", "delta", "r_grid", "tvs", "lattice", "resolution",
               "geometric_n", "cle_n", "dimension_steps")


def config_from_args(args) -> ExperimentConfig:
    file_cfg = read_config(args.config) if args.config else {}
    conv = {"M": _int_list, "a": parse_level, "b": parse_level, "specs": _pairs,
            "delta": float, "r_grid": _float_list, "tvs": _pairs, "lattice": int,
            "resolution": int, "geometric_n": int, "cle_n": int, "dimension_steps": int,
            "seed": int, "step": float, "n": int, "suite": str}
    merged = {}
    for k, v in file_cfg.items():
        if k not in conv:
            raise UsageError(f"unknown config key {k!r}")
        merged[k] = conv[k](v)
    for k in ("suite", "seed", "step", "n") + _PARAM_KEYS:
        v = getattr(args, k, None)
        if v is not None:
            merged[k] = v
    suite = merged.pop("suite", None)
    if suite is None:
        raise UsageError("--suite is required")
    params = {k: merged[k] for k in _PARAM_KEYS if k in merged}
    if "r_grid" in params:
        params["r_grid"] = np.asarray(params["r_grid"], dtype=float)
    return ExperimentConfig(suite, int(merged.get("seed", 0)), merged.get("step"), merged.get("n"), params)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        rep = run(cfg, args.out)
    except (UsageError, InvalidArgument) as exc:
        parser.exit(2, f"btls: error: {exc}\n")
    for kind in args.emit:
        try:
            emit_figure_data(rep, kind)
        except ArtifactNotFound as exc:
            print(f"btls: warning: {exc}", file=sys.stderr)
    for v in rep.verdicts:
        print(f"{'PASS' if v.passed else 'FAIL'}  {v.test}  statistic={v.statistic:.6g}"
              + (f"  p={v.p:.4g}" if v.p is not None else ""))
    print(f"report: {Path(args.out) / 'report.json'}")
    return 0 if rep.passed else 1


if __name__ == "__main__":
    sys.exit(main())
