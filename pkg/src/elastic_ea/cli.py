"""``elastic-ea`` command line: align, simulate, ea-study, synth-layout.

Exit codes: 0 success, 2 malformed input, 3 conflicting configuration.
"""
from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Optional

from . import __version__
from ._meta import metadata
from .align import DEFAULT_WINDOW, EXHAUSTIVE_MAX_T, align
from .io import InputError, read_layout, read_rating, write_csv, write_json, write_layout, write_rating
from .metrics import pearson, warp_amount
from .preprocess import SmoothingSpec
from .simulate import METHOD_LABELS, EtaMode, SimConfig, SimulationReport, generate_ea_layout, run_simulation
from .study import PAIR_COLUMNS, StudyConfig, method_for, prepare, run_study

EXIT_OK = 0
EXIT_MALFORMED = 2
EXIT_CONFLICT = 3

COST_WARNING_ALIGNMENTS = 20_000

METHOD_ALIASES = {
    "none": "no_alignment", "identity": "no_alignment", "no_alignment": "no_alignment",
    "fixed": "optimal_fixed", "optimal_fixed": "optimal_fixed",
    "srvf": "penalized_srvf", "penalized": "penalized_srvf", "penalized_srvf": "penalized_srvf",
    "unpenalized": "unpenalized_srvf", "unpenalized_srvf": "unpenalized_srvf",
}


class ConfigConflict(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_MALFORMED, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _smoothing(text):
    try:
        return SmoothingSpec.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _add_alignment_flags(p):
    p.add_argument("--method", choices=("none", "fixed", "srvf"), default="srvf")
    p.add_argument("--nu", type=float, default=None,
                   help="warping limit in seconds (default 8)")
    p.add_argument("--unbounded", action="store_true", help="unpenalized SRVF alignment")
    p.add_argument("--grid", type=_positive_int, default=300, help="analysis grid size")
    p.add_argument("--smooth", type=_smoothing, default=SmoothingSpec(),
                   metavar="{none|spline|spline:LAM|kernel:H}")
    p.add_argument("--window", type=_positive_int, default=None,
                   help=f"DP step window in grid points (default {DEFAULT_WINDOW})")
    p.add_argument("--exhaustive", action="store_true",
                   help=f"all predecessors (grids up to {EXHAUSTIVE_MAX_T + 1} points)")
    p.add_argument("--jobs", type=_positive_int, default=1)
    p.add_argument("--out", default=".", help="output directory")


def _window(args) -> Optional[int]:
    if args.exhaustive and args.window is not None:
        raise ConfigConflict("--window and --exhaustive are mutually exclusive")
    if args.exhaustive:
        if args.grid - 1 > EXHAUSTIVE_MAX_T:
            raise ConfigConflict(
                f"--exhaustive needs --grid <= {EXHAUSTIVE_MAX_T + 1}, got {args.grid}")
        return None
    return DEFAULT_WINDOW if args.window is None else args.window


def _study_config(args, min_corr: float = 0.0) -> StudyConfig:
    window = _window(args)
    if args.unbounded and args.nu is not None:
        raise ConfigConflict("--nu and --unbounded are mutually exclusive")
    if args.unbounded and args.method != "srvf":
        raise ConfigConflict(f"--unbounded applies to --method srvf, not {args.method}")
    nu = None if args.unbounded else (8.0 if args.nu is None else args.nu)
    if nu is not None and not nu > 0:
        raise InputError(f"--nu must be positive, got {nu}")
    return StudyConfig(method=args.method, nu=nu, window=window, grid=args.grid,
                       smoothing=args.smooth, min_identity_corr=min_corr)


def _flags(args, drop=("out", "jobs", "func")) -> dict:
    out = {}
    for k, v in sorted(vars(args).items()):
        if k in drop:
            continue
        out[k] = v.describe() if isinstance(v, SmoothingSpec) else v
    return out


def _window_label(cfg: StudyConfig):
    return "exhaustive" if cfg.window is None else cfg.window


# -- align ------------------------------------------------------------------

def _align_one(task):
    name, path, x, raw, cfg = task
    tol = 1e-9 * raw.grid.span
    if abs(raw.grid.t0 - x.grid.t0) > tol or abs(raw.grid.tT - x.grid.tT) > tol:
        raise InputError(
            f"{path}: observed on [{raw.grid.t0:g}, {raw.grid.tT:g}], "
            f"target on [{x.grid.t0:g}, {x.grid.tT:g}]")
    y = prepare(raw, cfg, x.grid.t0, x.grid.tT)
    method = method_for(cfg, x.grid.span)
    res = align(x, y, method)
    entry = {
        "name": name,
        "file": str(path),
        "cost": res.cost,
        "rho_pre": pearson(x, y),
        "rho_post": pearson(x, res.aligned),
        "phase_distance": res.phase_distance,
        "sup_deviation_seconds": res.sup_deviation,
        "warp_amount": warp_amount(res.warping),
        "delay_seconds": res.delay,
        "method": method.describe(),
    }
    return entry, res


def cmd_align(args) -> int:
    cfg = _study_config(args)
    x = prepare(read_rating(args.target), cfg)
    names = [Path(p).stem for p in args.perceiver]
    if len(set(names)) != len(names):
        raise InputError("perceiver files must have distinct names")
    tasks = [(n, p, x, read_rating(p), cfg) for n, p in zip(names, args.perceiver)]
    if args.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_align_one, tasks))
    else:
        results = [_align_one(t) for t in tasks]
    out = Path(args.out)
    for (entry, res) in results:
        write_rating(out / f"aligned_{entry['name']}.csv", res.aligned)
        write_csv(out / f"warping_{entry['name']}.csv", ("t", "gamma"),
                  zip(res.warping.grid.points(), res.warping.values))
    meta = metadata("align", _flags(args), window=_window_label(cfg),
                    nu_seconds=cfg.nu,
                    nu_normalized=None if cfg.nu is None else cfg.nu / x.grid.span,
                    grid_spacing_seconds=x.grid.spacing,
                    smoothing=cfg.smoothing.describe(),
                    warping_domain="normalized [0, 1]")
    write_json(out / "metrics.json", {"metadata": meta, "target": str(args.target),
                                      "perceivers": [e for e, _ in results]})
    return EXIT_OK


# -- simulate ---------------------------------------------------------------

_INLINE_SIM = ("I", "J", "k", "theta", "eta", "nu", "methods", "grid_points", "window",
               "exhaustive")


def _sim_configs(args) -> List[SimConfig]:
    if args.config is not None:
        given = [f for f in _INLINE_SIM if getattr(args, f) not in (None, False)]
        if given:
            raise ConfigConflict(f"--config cannot be combined with --{given[0].replace('_', '-')}")
        try:
            doc = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise InputError(f"{args.config}: cannot read ({exc.strerror})") from exc
        except json.JSONDecodeError as exc:
            raise InputError(f"{args.config}: invalid JSON ({exc})") from exc
        cells = doc.get("cells", [doc]) if isinstance(doc, dict) else None
        if not isinstance(cells, list) or not cells:
            raise InputError(f"{args.config}: expected a config object or {{'cells': [...]}}")
        out = []
        for i, c in enumerate(cells):
            try:
                if not isinstance(c, dict):
                    raise TypeError("cell must be an object")
                unknown = set(c) - set(SimConfig().as_dict())
                if unknown:
                    raise KeyError(f"unknown key {sorted(unknown)[0]!r}")
                if args.seed is not None:
                    c = {**c, "seed": args.seed}
                out.append(SimConfig.from_dict(c))
            except (KeyError, TypeError, ValueError) as exc:
                raise InputError(f"{args.config}: cell {i}: {exc}") from exc
        labels = [c.cell for c in out]
        if len(set(labels)) != len(labels):
            raise InputError(f"{args.config}: duplicate cells")
        return out
    if args.eta is not None and (args.k is not None or args.theta is not None):
        raise ConfigConflict("--eta cannot be combined with --k/--theta")
    if args.window is not None and args.exhaustive:
        raise ConfigConflict("--window and --exhaustive are mutually exclusive")
    if args.eta is not None:
        mode = EtaMode.fixed(args.eta)
    elif args.k is None and args.theta is None:
        mode = EtaMode.gamma(15, 2)
    elif args.k is None or args.theta is None:
        raise InputError("--k and --theta must be given together")
    else:
        mode = EtaMode.gamma(args.k, args.theta)
    methods = METHOD_LABELS
    if args.methods is not None:
        try:
            methods = tuple(dict.fromkeys(METHOD_ALIASES[m.strip()]
                                          for m in args.methods.split(",")))
        except KeyError as exc:
            raise InputError(f"--methods: unknown method {exc.args[0]!r}") from None
    grid_points = 300 if args.grid_points is None else args.grid_points
    if args.exhaustive and grid_points - 1 > EXHAUSTIVE_MAX_T:
        raise ConfigConflict(f"--exhaustive needs --grid-points <= {EXHAUSTIVE_MAX_T + 1}")
    window = None if args.exhaustive else (DEFAULT_WINDOW if args.window is None else args.window)
    return [SimConfig(
        n_targets=20 if args.I is None else args.I,
        n_perceivers=50 if args.J is None else args.J,
        grid_points=grid_points,
        eta_mode=mode,
        nu_align=30.0 if args.nu is None else args.nu,
        methods=methods,
        seed=0 if args.seed is None else args.seed,
        window=window,
    )]


def cmd_simulate(args) -> int:
    try:
        configs = _sim_configs(args)
    except ValueError as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(str(exc)) from exc
    n_align = sum(c.n_targets * c.n_perceivers * len(c.methods) for c in configs)
    if n_align > COST_WARNING_ALIGNMENTS:
        print(f"warning: {n_align} alignments requested; this can take hours on one core",
              file=sys.stderr)
    report: Optional[SimulationReport] = None
    for cfg in configs:
        r = run_simulation(cfg, jobs=args.jobs)
        report = r if report is None else report.merge(r)
    out = Path(args.out)
    write_csv(out / "report.csv", ("cell", "method", "metric", "mean", "sd", "n"),
              ([r["cell"], r["method"], r["metric"], r["mean"], r["sd"], r["n"]]
               for r in report.rows()))
    windows = sorted({"exhaustive" if c.window is None else str(c.window) for c in configs})
    meta = metadata("simulate", _flags(args), window=",".join(windows),
                    kernel_bandwidth="gaussian standard deviation in grid units",
                    rng="numpy Philox, SeedSequence((seed, tag, i[, j]))")
    write_json(out / "report.json", {"metadata": meta, **report.as_dict()})
    return EXIT_OK


# -- ea-study ---------------------------------------------------------------

def cmd_ea_study(args) -> int:
    cfg = _study_config(args, args.min_identity_corr)
    targets, perceivers = read_layout(args.layout)
    try:
        result = run_study(targets, perceivers, cfg, mode=args.mode, jobs=args.jobs,
                           seed=args.seed)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    out = Path(args.out)
    write_csv(out / "pairs.csv", PAIR_COLUMNS, (p.row() for p in result.pairs))
    write_csv(out / "dropped.csv", ("perceiver", "stimulus", "rho", "reason"),
              ([d.perceiver, d.stimulus, d.rho, d.reason] for d in result.dropped))
    meta = metadata("ea-study", _flags(args), window=_window_label(cfg), study=cfg.describe())
    doc = {
        "metadata": meta,
        "mode": args.mode,
        "pairs": [dict(zip(PAIR_COLUMNS, p.row())) for p in result.pairs],
        "dropped": [{"perceiver": d.perceiver, "stimulus": d.stimulus, "rho": d.rho,
                     "reason": d.reason} for d in result.dropped],
    }
    if args.mode == "lmm":
        doc["fits"] = result.fits
        doc["skipped"] = result.skipped
        cols = ("perceiver", "beta0", "beta1", "sigma2", "sigma2_b0", "sigma2_b1",
                "reml_loglik", "converged", "mean_phase", "vertical")
        write_csv(out / "lmm.csv", cols,
                  ([pid] + [f[c] for c in cols[1:]] for pid, f in result.fits.items()))
    write_json(out / "study.json", doc)
    return EXIT_OK


# -- synth-layout -----------------------------------------------------------

def cmd_synth_layout(args) -> int:
    lay = generate_ea_layout(args.seed, args.perceivers, args.stimuli,
                             n_points=args.points, duration=args.duration, eta=args.eta)
    write_layout(args.out, lay.targets, lay.perceivers)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="elastic-ea", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("align", help="align perceiver ratings to a target")
    a.add_argument("--target", required=True)
    a.add_argument("--perceiver", required=True, nargs="+")
    a.add_argument("--seed", type=int, default=0, help="recorded only; alignment is deterministic")
    _add_alignment_flags(a)
    a.set_defaults(func=cmd_align)

    s = sub.add_parser("simulate", help="run the alignment benchmark")
    s.add_argument("--config", default=None, help="JSON SimConfig or {'cells': [...]}")
    s.add_argument("--I", dest="I", type=_positive_int, default=None, help="targets (20)")
    s.add_argument("--J", dest="J", type=_positive_int, default=None, help="perceivers per target (50)")
    s.add_argument("--k", type=float, default=None, help="gamma shape for eta")
    s.add_argument("--theta", type=float, default=None, help="gamma scale for eta")
    s.add_argument("--eta", type=float, default=None, help="fixed true warping limit")
    s.add_argument("--nu", type=float, default=None, help="alignment limit (30)")
    s.add_argument("--methods", default=None,
                   help="comma list of penalized,unpenalized,fixed,none")
    s.add_argument("--grid-points", type=_positive_int, default=None)
    s.add_argument("--window", type=_positive_int, default=None)
    s.add_argument("--exhaustive", action="store_true")
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--jobs", type=_positive_int, default=1)
    s.add_argument("--out", default=".")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("ea-study", help="correlational or mixed-model EA analysis")
    e.add_argument("--layout", required=True)
    e.add_argument("--mode", choices=("corr", "lmm"), default="corr")
    e.add_argument("--min-identity-corr", type=float, default=0.0)
    e.add_argument("--seed", type=int, default=0, help="seeds the REML restarts")
    _add_alignment_flags(e)
    e.set_defaults(func=cmd_ea_study)

    g = sub.add_parser("synth-layout", help="write a synthetic study layout")
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--perceivers", type=_positive_int, default=4)
    g.add_argument("--stimuli", type=_positive_int, default=3)
    g.add_argument("--points", type=_positive_int, default=300)
    g.add_argument("--duration", type=float, default=120.0)
    g.add_argument("--eta", type=float, default=8.0)
    g.set_defaults(func=cmd_synth_layout)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigConflict as exc:
        print(f"elastic-ea {args.command}: configuration conflict: {exc}", file=sys.stderr)
        return EXIT_CONFLICT
    except (InputError, ValueError) as exc:
        print(f"elastic-ea {args.command}: {exc}", file=sys.stderr)
        return EXIT_MALFORMED


if __name__ == "__main__":
    sys.exit(main())
