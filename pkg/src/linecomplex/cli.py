"""linecomplex: build the Speiser-graph truncations, check them, report.

Every subcommand writes its artifacts into ``--out`` and prints a short
summary whose numbers are all in ``summary.json``.  The exit status is 0 when
every asserted inequality holds, 1 otherwise (naming the first failure), and 2
for usage errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import qmc

from . import analysis, io, surface
from .gamma import Gamma, SchedulePolicy, assemble, check_contract, sign_pattern
from .tree import build_pruned_tree

DEFAULT_SEED = 0x5EED_2718_2818_2845


@dataclass
class Check:
    name: str
    ok: bool
    detail: str = ""


@dataclass
class RunConfig:
    command: str
    N: int = 8
    L: int = 8
    schedule: dict = field(default_factory=lambda: {"constant": 3})
    window: int | None = None
    spread_tol: float = 0.02
    r_max: int | None = None
    s_range: list[int] = field(default_factory=lambda: [1, 6])
    epsilon: float = 0.0
    seed: int = DEFAULT_SEED
    walk_trials: int = 20000
    horizons: list[int] = field(default_factory=lambda: [10, 100, 1000])
    rmax: float = 16.0
    grid: int = 16
    mesh_h: float = 0.02
    stencil: int = 8
    rtol: float = 1e-3
    max_spread: float = 1.5
    what: list[str] = field(default_factory=lambda: ["graph", "tree"])
    formats: list[str] = field(default_factory=lambda: ["json", "dot"])
    version: str = io.FORMAT_VERSION

    def to_json(self) -> dict:
        return asdict(self)


class Report:
    """Artifacts, summary values and checks gathered by one run."""

    def __init__(self, out: Path, cfg: RunConfig, plots: bool, figures: bool):
        self.out = out
        self.cfg = cfg
        self.plots = plots
        self.figures = figures
        self.summary: dict = {}
        self.checks: list[Check] = []
        self.written: list[Path] = []

    def check(self, name: str, ok: bool, detail: str = "") -> None:
        self.checks.append(Check(name, bool(ok), detail))

    def json(self, name: str, obj, compact: bool = False) -> None:
        self.written.append(io.write_json(self.out / name, obj, compact))

    def csv(self, name: str, rows, columns=None) -> None:
        self.written.append(io.write_csv(self.out / name, rows, columns))

    def text(self, name: str, text: str) -> None:
        self.written.append(io.atomic_write(self.out / name, text))

    def dat(self, name: str, columns, rows) -> None:
        if self.plots:
            self.text(name, io.gnuplot_text(columns, rows))

    def figure(self, fn, *args) -> None:
        if self.figures:
            self.written.append(fn(*args))

    @property
    def failed(self) -> Check | None:
        return next((c for c in self.checks if not c.ok), None)


# -- argument handling ------------------------------------------------------------------------


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return v


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _s_range(text: str) -> list[int]:
    lo, sep, hi = text.partition(":")
    try:
        a, b = int(lo), int(hi if sep else lo)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO:HI, got {text!r}") from None
    if a < 1 or b < a:
        raise argparse.ArgumentTypeError(f"bad s range {text!r}")
    return [a, b]


def _graph_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--N", type=_positive_int, default=8, help="ray length of the tree truncation")
    p.add_argument("--L", type=int, choices=(4, 8), default=8, help="boundary circle length")
    p.add_argument("--s", type=_positive_int, default=3, help="circles per leaf gadget (constant schedule)")
    p.add_argument("--schedule", choices=("constant", "banded"), default="constant")
    p.add_argument("--s0", type=_positive_int, default=2, help="banded schedule: base s")
    p.add_argument("--band", type=_positive_int, default=4, help="banded schedule: ray vertices per band")


def _common_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default="out", help="output directory (default: out)")
    p.add_argument("--config", help="JSON file; its keys override the flags")
    p.add_argument("--emit-plots", action="store_true", help="also write gnuplot data files")
    p.add_argument("--no-figures", action="store_true", help="skip the PNG figures")
    p.add_argument("--quiet", action="store_true")


def _excess_args(p):
    p.add_argument("--window", type=_positive_int, help="tail window for limsup/liminf (default: half)")
    p.add_argument("--r-max", type=_positive_int, help="largest radius (default: trusted radius)")
    p.add_argument("--spread-tol", type=float, default=0.02,
                   help="banded schedule: allowed max - min of the mean excess over the tail window")


def _type_args(p):
    p.add_argument("--s-range", type=_s_range, default=[1, 6], help="candidate s values LO:HI")
    p.add_argument("--epsilon", type=float, default=0.0, help="required margin in choose_s")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED, help="seed for the random walks")
    p.add_argument("--walk-trials", type=_positive_int, default=20000)
    p.add_argument("--horizons", type=_int_list, default=[10, 100, 1000])


def _surface_args(p):
    p.add_argument("--rmax", type=float, default=16.0, help="largest radius of the r-grid")
    p.add_argument("--grid", type=_positive_int, default=16, help="number of radii (rmax/grid .. rmax)")
    p.add_argument("--mesh-h", type=float, default=0.02, help="cell size of the mesh cross-check")
    p.add_argument("--stencil", type=int, choices=(8, 16), default=8)
    p.add_argument("--rtol", type=float, default=1e-3, help="quadrature tolerance")
    p.add_argument("--max-spread", type=float, default=1.5)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="linecomplex", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    specs = {
        "build": ("assemble Gamma, check its structure, write graph JSON", [_graph_args]),
        "excess": ("ball statistics, sign pattern, sigma counting", [_graph_args, _excess_args]),
        "type": ("choose s, growth, Nash-Williams, resistance, walks", [_graph_args, _excess_args, _type_args]),
        "surface": ("distances, areas and curvature ratio of Y", [_surface_args]),
        "all": ("every analysis in one run", [_graph_args, _excess_args, _type_args, _surface_args]),
        "export": ("graph and tree as JSON and/or DOT", [_graph_args]),
    }
    for name, (help_, adders) in specs.items():
        p = sub.add_parser(name, help=help_)
        for add in adders:
            add(p)
        if name == "export":
            p.add_argument("--what", type=lambda t: t.split(","), default=["graph", "tree"])
            p.add_argument("--format", dest="formats", type=lambda t: t.split(","), default=["json", "dot"])
        _common_args(p)
    return ap


_FLAG_KEYS = {
    "N", "L", "window", "spread_tol", "r_max", "s_range", "epsilon", "seed", "walk_trials", "horizons",
    "rmax", "grid", "mesh_h", "stencil", "rtol", "max_spread", "what", "formats",
}


def make_config(ap: argparse.ArgumentParser, args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(args.command)
    for key in _FLAG_KEYS:
        if hasattr(args, key):
            setattr(cfg, key, getattr(args, key))
    if hasattr(args, "schedule"):
        cfg.schedule = (
            {"constant": args.s} if args.schedule == "constant" else {"banded": [args.s0, args.band]}
        )
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            ap.error(f"cannot read config {args.config}: {exc}")
        unknown = set(data) - _FLAG_KEYS - {"schedule"}
        if unknown:
            ap.error(f"unknown config keys: {', '.join(sorted(unknown))}")
        for k, v in data.items():
            setattr(cfg, k, v)
    try:
        SchedulePolicy.from_json(cfg.schedule)
    except (ValueError, TypeError) as exc:
        ap.error(str(exc))
    if not isinstance(cfg.N, int) or cfg.N < 1:
        ap.error("N must be a positive integer")
    if cfg.L not in (4, 8):
        ap.error("L must be 4 or 8")
    if cfg.rmax <= 0 or cfg.grid < 1 or cfg.mesh_h <= 0:
        ap.error("rmax, grid and mesh-h must be positive")
    return cfg


# -- analyses -------------------------------------------------------------------------------------


def _gamma(cfg: RunConfig) -> Gamma:
    return assemble(build_pruned_tree(cfg.N), SchedulePolicy.from_json(cfg.schedule), cfg.L)


def run_build(rep: Report, gamma: Gamma) -> None:
    g = gamma.graph
    contract = check_contract(gamma)
    rep.json("gamma.json", io.graph_to_json(g), compact=True)
    rep.json("tree.json", gamma.tree.to_json(), compact=True)
    rep.json(
        "validity.json",
        {"config": gamma.config(), "checks": contract.checks, "details": contract.details,
         "n_vertices": g.n_vertices, "n_edges": g.n_edges, "w0": gamma.w0,
         "trusted_radius": g.trusted_radius(gamma.w0)},
    )
    rep.summary.update(
        n_vertices=g.n_vertices, n_edges=g.n_edges, w0=gamma.w0,
        trusted_radius=int(g.trusted_radius(gamma.w0)),
    )
    for name, ok in contract.checks.items():
        rep.check(f"structure: {name}", ok, contract.details.get("labeling", ""))


def run_excess(rep: Report, gamma: Gamma) -> analysis.BallStats:
    cfg = rep.cfg
    stats = analysis.ball_stats(gamma.graph, gamma.w0, cfg.r_max)
    rows = stats.rows()
    rep.csv("excess.csv", rows)
    ts = stats.trusted()
    means = [float(m) for m in ts.mean_excess]
    tail = means[-analysis.tail_window(len(means), cfg.window):]
    s_min = int(gamma.piece_s[gamma.piece_s > 0].min())
    pattern = sign_pattern(gamma)
    sig = analysis.sigma_check(gamma, stats)
    shifted = stats.shifted_count_violations(s_min)
    rep.json(
        "excess.json",
        {
            "trusted_radius": stats.trusted_radius,
            "limsup_estimate": max(tail),
            "liminf_estimate": min(tail),
            "tail_spread": max(tail) - min(tail),
            "sign_pattern": pattern,
            "sigma": {"n": len(sig.domain), "injective": sig.injective, "distances_match": sig.distances_match},
            "shifted_count_violations": shifted,
            "s_min": s_min,
        },
    )
    rep.dat("excess.dat", ["r", "mean_excess", "n_plus", "n_minus"],
            [[int(x["r"]), float(x["mean_excess"]), x["n_plus"], x["n_minus"]] for x in rows])
    from .plotting import excess_figure

    rep.figure(excess_figure, rows, rep.out / "excess.png")
    rep.summary.update(mean_excess_limsup=max(tail), mean_excess_liminf=min(tail),
                       mean_excess_spread=max(tail) - min(tail))
    rep.check("sign pattern: positive vertices on 2-gons", not pattern["positive_off_two_gon"],
              f"{len(pattern['positive_off_two_gon'])} exceptions")
    rep.check("sign pattern: negative vertex in every pants piece", not pattern["pants_without_negative"])
    rep.check("sigma injective", sig.injective)
    rep.check("d(w, sigma(w)) = s", sig.distances_match)
    rep.check(f"n+(r+{s_min}) <= n-(r)", not shifted, f"fails at r = {shifted[:5]}")
    rep.check("mean excess < 0 at every trusted radius", analysis.excess_negative_everywhere(stats))
    if gamma.policy.mode == "banded":
        spread = max(tail) - min(tail)
        rep.check("mean excess tail spread within tolerance", spread <= cfg.spread_tol,
                  f"spread {spread:.4g} > {cfg.spread_tol}")
    return stats


def run_type(rep: Report, gamma: Gamma | None) -> Gamma:
    cfg = rep.cfg
    tree = build_pruned_tree(cfg.N)
    lo, hi = cfg.s_range
    try:
        choice = analysis.choose_s(tree, cfg.L, range(lo, hi + 1), cfg.epsilon)
    except analysis.ChooseSError as exc:
        rep.json("type.json", {"choose_s": {"margins": {str(k): v for k, v in exc.margins.items()}}})
        rep.check("choose_s", False, str(exc))
        return gamma
    chosen = choice.gamma
    fit = choice.fit
    nw = analysis.nash_williams(chosen)
    tr = int(chosen.graph.trusted_radius(chosen.w0))
    radii = list(range(1, tr + 1))
    res = analysis.resistance_series(chosen, radii, nw)
    rep.csv(
        "resistance.csv",
        [{"r": r, "R_eff": R, "nash_williams_lower": lb} for r, R, lb in zip(res.radii, res.resistance, res.nw_lower)],
    )
    walks = [
        analysis.random_walk_return(chosen.graph, chosen.w0, h, cfg.walk_trials, cfg.seed, tr)
        for h in cfg.horizons
    ]
    rep.csv("walks.csv", [
        {"horizon": w.horizon, "trials": w.trials, "returned": w.returned, "excluded": w.excluded,
         "frequency": w.frequency, "low": w.low, "high": w.high} for w in walks
    ])
    rep.json(
        "type.json",
        {
            "s": choice.s,
            "epsilon": choice.epsilon,
            "a": fit.a,
            "c": fit.c,
            "fit_quality": fit.quality,
            "fit_radii": list(fit.radii),
            "choose_s": {"margins": {str(k): v for k, v in choice.margins.items()}},
            "nash_williams": {"cutset_sizes": nw.cutset_sizes, "partial_sums": nw.partial_sums,
                              "increment": nw.increment, "separating": nw.separating,
                              "inner_radius": nw.inner_radius},
            "R_eff": res.resistance,
            "scaled_increments": res.scaled_increments(),
            "seed": cfg.seed,
        },
    )
    rep.dat("resistance.dat", ["r", "R_eff", "nw_lower"], [list(x) for x in zip(res.radii, res.resistance, res.nw_lower)])
    rep.dat("walks.dat", ["horizon", "frequency", "low", "high"], [[w.horizon, w.frequency, w.low, w.high] for w in walks])
    from .plotting import resistance_figure, walk_figure

    rep.figure(resistance_figure, res.radii, res.resistance, res.nw_lower, rep.out / "resistance.png")
    rep.figure(walk_figure, [w.horizon for w in walks], [w.frequency for w in walks],
               [w.low for w in walks], [w.high for w in walks], rep.out / "walks.png")
    rep.summary.update(
        s_chosen=choice.s, epsilon=choice.epsilon, a=fit.a, c=fit.c, fit_quality=fit.quality,
        R_eff_first=res.resistance[0], R_eff_last=res.resistance[-1],
        walk_return_frequency={str(w.horizon): w.frequency for w in walks},
    )
    rep.check("choose_s", True, f"s = {choice.s}")
    rep.check("growth a > 1", fit.a > 1.0 and fit.c > 0, f"a = {fit.a:.4f}")
    rep.check("Nash-Williams cutsets constant", len(set(nw.cutset_sizes)) == 1 and all(nw.separating))
    rep.check("R_eff >= Nash-Williams sum", res.dominates_nash_williams())
    rep.check("R_eff strictly increasing", res.strictly_increasing())
    rep.check("r^2 relative increment not decaying", res.increments_not_decaying())
    return chosen


def _mesh_crosscheck(cfg: RunConfig):
    """distance_from_a against the mixed-metric mesh on Halton points of D(a, 3)."""
    field_ = surface.mesh_distance_oracle(cfg.mesh_h, (-5.0, 5.0), (-1.2, 6.0), stencil=cfg.stencil)
    pts = qmc.scale(qmc.Halton(2, scramble=False).random(257)[1:], [-4.0, -0.9], [4.0, 5.0])
    nodes = np.array([field_.node(x, y) for x, y in pts])
    semi = surface.distance_from_a(nodes[:, 0], nodes[:, 1])
    mesh = np.array([field_.at(x, y) for x, y in nodes])
    keep = (semi > 0.1) & (semi < 3.5)
    rel = mesh[keep] / semi[keep] - 1.0
    return float(rel.min()), float(rel.max()), int(keep.sum())


def run_surface(rep: Report) -> None:
    cfg = rep.cfg
    radii = [cfg.rmax * (k + 1) / cfg.grid for k in range(cfg.grid)]
    br = surface.curvature_report(radii, cfg.rtol)
    rows = br.rows()
    rep.csv("surface.csv", rows)
    lo, hi, n = _mesh_crosscheck(cfg)
    bound = surface.stencil_bound(cfg.stencil)
    summ = br.summary()
    summ.update(mesh_h=cfg.mesh_h, stencil=cfg.stencil, mesh_rel_min=lo, mesh_rel_max=hi, mesh_points=n,
                stencil_bound=bound)
    rep.json("surface.json", summ)
    rep.dat("surface.dat", ["r", "length_beta_r", "area_P", "area_Q", "ratio"],
            [[float(x) for x in (r["r"], r["length_beta_r"], r["area_P"], r["area_Q"], r["ratio"])] for r in rows])
    from .plotting import surface_figure

    rep.figure(surface_figure, rows, rep.out / "surface.png")
    rep.summary.update(surface_epsilon=br.epsilon_estimate, kappa=br.kappa, K=br.K)
    rep.check("surface epsilon > 0", br.epsilon_estimate > 0, f"{br.epsilon_estimate:.4g}")
    rep.check("area_P >= kappa length, spread", 0 < br.kappa and br.kappa_spread <= cfg.max_spread,
              f"spread {br.kappa_spread:.3f}")
    rep.check("area_Q <= K length, spread", math.isfinite(br.K) and br.K_spread <= cfg.max_spread,
              f"spread {br.K_spread:.3f}")
    rep.check("area_P <= hyperbolic disc area",
              all(p <= surface.hyperbolic_disc_area(r) * (1 + cfg.rtol) for r, p in zip(br.radii, br.area_P)))
    rep.check("mesh never shorter than distance_from_a", lo >= -1e-3, f"min relative gap {lo:.2e}")
    rep.check("mesh within stencil bound", hi <= bound + 5e-3, f"max relative gap {hi:.4f}")


def run_export(rep: Report, gamma: Gamma) -> None:
    cfg = rep.cfg
    if "graph" in cfg.what:
        if "json" in cfg.formats:
            rep.json("gamma.json", io.graph_to_json(gamma.graph), compact=True)
        if "dot" in cfg.formats:
            rep.text("gamma.dot", io.graph_to_dot(gamma.graph))
    if "tree" in cfg.what:
        if "json" in cfg.formats:
            rep.json("tree.json", gamma.tree.to_json(), compact=True)
        if "dot" in cfg.formats:
            rep.text("tree.dot", io.tree_to_dot(gamma.tree))
    rep.summary.update(n_vertices=gamma.graph.n_vertices, n_edges=gamma.graph.n_edges)


# -- driver -------------------------------------------------------------------------------------


def _print_summary(rep: Report, stream) -> None:
    print(f"linecomplex {rep.cfg.command}  (artifacts in {rep.out})", file=stream)
    for k in sorted(rep.summary):
        v = rep.summary[k]
        if isinstance(v, float):
            v = f"{v:.6g}"
        elif isinstance(v, dict):
            v = ", ".join(f"{a}: {b:.4g}" for a, b in v.items())
        print(f"  {k:28s} {v}", file=stream)
    for c in rep.checks:
        print(f"  [{'ok' if c.ok else 'FAIL'}] {c.name}" + (f"  ({c.detail})" if c.detail and not c.ok else ""),
              file=stream)


def run(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    cfg = make_config(ap, args)
    rep = Report(Path(args.out), cfg, args.emit_plots, not args.no_figures)
    rep.json("run_config.json", cfg.to_json())
    cmd = cfg.command
    gamma = None
    if cmd in ("build", "excess", "export", "all"):
        gamma = _gamma(cfg)
    if cmd in ("build", "all"):
        run_build(rep, gamma)
    if cmd in ("excess", "all"):
        run_excess(rep, gamma)
    if cmd in ("type", "all"):
        run_type(rep, gamma)
    if cmd in ("surface", "all"):
        run_surface(rep)
    if cmd == "export":
        run_export(rep, gamma)
    rep.summary["checks_passed"] = sum(c.ok for c in rep.checks)
    rep.summary["checks_total"] = len(rep.checks)
    rep.json("summary.json", {"summary": rep.summary,
                              "checks": [{"name": c.name, "ok": c.ok, "detail": c.detail} for c in rep.checks]})
    if not args.quiet:
        _print_summary(rep, sys.stdout)
    bad = rep.failed
    if bad:
        print(f"linecomplex: inequality failed: {bad.name}" + (f" ({bad.detail})" if bad.detail else ""),
              file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
