"""Synthetic misaligned rating data and the alignment benchmark built on it.

Each target ``i`` and each pair ``(i, j)`` draws from its own Philox stream
keyed by ``(seed, tag, i[, j])``, so results do not depend on how the pairs
are scheduled across workers.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .align import AlignmentMethod, DEFAULT_WINDOW, align
from .core import (NormalizedBound, SampledFunction, UniformGrid, WarpingFunction,
                   apply_warping, invert_warping, unit_points)
from .metrics import PairMetrics, pair_metrics
from .preprocess import kernel_smooth

__all__ = [
    "METHOD_LABELS",
    "EtaMode",
    "SimConfig",
    "CellSummary",
    "SimulationReport",
    "stream",
    "random_walk",
    "generate_target",
    "generate_aligned_perceiver",
    "warping_knots",
    "generate_warping",
    "draw_eta",
    "simulate_pair",
    "run_simulation",
    "EaLayout",
    "generate_ea_layout",
]

# Table order: proposed method first
METHOD_LABELS = ("penalized_srvf", "unpenalized_srvf", "optimal_fixed", "no_alignment")

TARGET_BANDWIDTH = 10.0
EPS1_BANDWIDTH = 40.0
EPS2_BANDWIDTH = 20.0

_TAG_TARGET = 0
_TAG_PAIR = 1
_TAG_STIMULUS = 2
_TAG_PERCEIVER = 3


def stream(seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator for the task identified by ``key``."""
    if seed < 0 or any(k < 0 for k in key):
        raise ValueError("seeds and stream keys must be nonnegative")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, *key])))


def _sim_grid(n_points: int) -> UniformGrid:
    return UniformGrid(0.0, float(n_points - 1), n_points)


def random_walk(rng: np.random.Generator, n_points: int) -> np.ndarray:
    """Cumulative sum of iid standard normals (undoes a lag-1 difference)."""
    return np.cumsum(rng.standard_normal(n_points))


def generate_target(rng: np.random.Generator, n_points: int = 300,
                    bandwidth: float = TARGET_BANDWIDTH) -> SampledFunction:
    """Kernel-smoothed random walk on ``t = 0, 1, ..., n_points - 1``."""
    raw = SampledFunction(_sim_grid(n_points), random_walk(rng, n_points))
    return kernel_smooth(raw, bandwidth)


def generate_aligned_perceiver(x: SampledFunction, rng: np.random.Generator, *,
                               omega: Optional[float] = None,
                               eps1: Optional[np.ndarray] = None,
                               eps2: Optional[np.ndarray] = None) -> SampledFunction:
    """``(1 - w) * eps1 * x + w * eps2`` with ``w ~ U(0.5, 1)``.

    ``eps1`` is a Wiener path plus one, smoothed with bandwidth 40; ``eps2`` is
    a fresh target-style walk smoothed with bandwidth 20 (grid units). The
    keyword arguments override the random draws; the draws are still taken so
    the stream advances identically.
    """
    n = x.n_points
    dt = x.grid.spacing
    w = rng.uniform(0.5, 1.0)
    steps = rng.normal(0.0, math.sqrt(dt), n - 1)
    wiener = np.concatenate(([0.0], np.cumsum(steps)))
    walk = random_walk(rng, n)
    if omega is not None:
        w = omega
    if eps1 is None:
        eps1 = kernel_smooth(x.with_values(wiener + 1.0), EPS1_BANDWIDTH * dt).values
    if eps2 is None:
        eps2 = kernel_smooth(x.with_values(walk), EPS2_BANDWIDTH * dt).values
    return x.with_values((1.0 - w) * np.asarray(eps1) * x.values + w * np.asarray(eps2))


def warping_knots(eta: float, rng: np.random.Generator, span: float, step: float,
                  max_tries: int = 100_000) -> Tuple[np.ndarray, np.ndarray]:
    """Knots of a piecewise-linear warping of ``[0, span]`` reaching ``+-eta``.

    Four sorted uniform draws ``t1 < t2 < t3 < t4`` are redrawn until
    ``t3 - t2 > 2 eta`` (needed for the middle piece to increase) and both
    plateaus ``[t1, t2]``, ``[t3, t4]`` are at least two grid steps long.
    """
    if not 0 < eta < span / 4:
        raise ValueError(f"eta must lie in (0, {span / 4:g}), got {eta}")
    for _ in range(max_tries):
        t1, t2, t3, t4 = np.sort(rng.uniform(0.0, span, 4))
        if (t1 > 0 and t4 < span and t3 - t2 > 2 * eta
                and t2 - t1 >= 2 * step and t4 - t3 >= 2 * step):
            xs = np.array([0.0, t1, t2, t3, t4, span])
            ys = np.array([0.0, t1 + eta, t2 + eta, t3 - eta, t4 - eta, span])
            return xs, ys
    raise RuntimeError("could not place warping plateaus; eta too large for the grid")


def generate_warping(eta: float, rng: np.random.Generator, grid: UniformGrid) -> WarpingFunction:
    """Strictly increasing warping with ``sup |psi - id| = eta`` (native units),
    returned on the normalized grid."""
    xs, ys = warping_knots(eta, rng, grid.span, grid.spacing)
    u = np.interp(unit_points(grid.n_points), xs / grid.span, ys / grid.span)
    return WarpingFunction.repaired(u)


@dataclass(frozen=True)
class EtaMode:
    """True warping limit: gamma(``k``, ``theta``) draws or a fixed ``eta``."""

    kind: str
    k: Optional[float] = None
    theta: Optional[float] = None
    eta: Optional[float] = None

    def __post_init__(self):
        if self.kind == "gamma":
            if not (self.k and self.k > 0 and self.theta and self.theta > 0):
                raise ValueError("gamma eta mode needs k > 0 and theta > 0")
        elif self.kind == "fixed":
            if not (self.eta and self.eta > 0):
                raise ValueError("fixed eta mode needs eta > 0")
        else:
            raise ValueError(f"unknown eta mode {self.kind!r}")

    @classmethod
    def gamma(cls, k: float, theta: float) -> "EtaMode":
        return cls("gamma", k=float(k), theta=float(theta))

    @classmethod
    def fixed(cls, eta: float) -> "EtaMode":
        return cls("fixed", eta=float(eta))

    @property
    def label(self) -> str:
        if self.kind == "gamma":
            return f"k={self.k:g},theta={self.theta:g}"
        return f"eta={self.eta:g}"

    def as_dict(self) -> dict:
        if self.kind == "gamma":
            return {"kind": "gamma", "k": self.k, "theta": self.theta}
        return {"kind": "fixed", "eta": self.eta}


def draw_eta(mode: EtaMode, rng: np.random.Generator, span: float,
             max_tries: int = 100_000) -> float:
    """True limit for one pair; gamma draws outside ``(0, span/4)`` are redrawn."""
    if mode.kind == "fixed":
        return mode.eta
    for _ in range(max_tries):
        eta = float(rng.gamma(mode.k, mode.theta))
        if 0 < eta < span / 4:
            return eta
    raise RuntimeError("gamma draws never fell inside the feasible range")


@dataclass(frozen=True)
class SimConfig:
    n_targets: int = 20
    n_perceivers: int = 50
    grid_points: int = 300
    eta_mode: EtaMode = field(default_factory=lambda: EtaMode.gamma(15, 2))
    nu_align: float = 30.0
    methods: Tuple[str, ...] = METHOD_LABELS
    seed: int = 0
    window: Optional[int] = DEFAULT_WINDOW

    def __post_init__(self):
        if self.n_targets < 1 or self.n_perceivers < 1:
            raise ValueError("need at least one target and one perceiver")
        if self.grid_points < 8:
            raise ValueError("simulation grid needs at least 8 points")
        if not self.nu_align > 0:
            raise ValueError("nu_align must be positive")
        unknown = set(self.methods) - set(METHOD_LABELS)
        if unknown or not self.methods:
            raise ValueError(f"unknown methods {sorted(unknown)}; choose from {METHOD_LABELS}")
        if self.window is not None and self.window < 1:
            raise ValueError("window must be at least 1")
        if self.eta_mode.kind == "fixed" and not self.eta_mode.eta < (self.grid_points - 1) / 4:
            raise ValueError("fixed eta must be below a quarter of the domain")
        object.__setattr__(self, "methods", tuple(self.methods))

    @property
    def grid(self) -> UniformGrid:
        return _sim_grid(self.grid_points)

    @property
    def cell(self) -> str:
        return self.eta_mode.label

    def alignment_methods(self) -> Dict[str, AlignmentMethod]:
        bound = NormalizedBound(self.nu_align, self.grid.span)
        table = {
            "penalized_srvf": AlignmentMethod.srvf(bound, self.window),
            "unpenalized_srvf": AlignmentMethod.srvf(None, self.window),
            "optimal_fixed": AlignmentMethod.fixed_delay(bound),
            "no_alignment": AlignmentMethod.identity(),
        }
        return {m: table[m] for m in self.methods}

    def as_dict(self) -> dict:
        return {
            "n_targets": self.n_targets,
            "n_perceivers": self.n_perceivers,
            "grid_points": self.grid_points,
            "eta_mode": self.eta_mode.as_dict(),
            "nu_align": self.nu_align,
            "methods": list(self.methods),
            "seed": self.seed,
            "window": "exhaustive" if self.window is None else self.window,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        eta = d.get("eta_mode", {"kind": "gamma", "k": 15, "theta": 2})
        if eta.get("kind") == "fixed":
            mode = EtaMode.fixed(eta["eta"])
        else:
            mode = EtaMode.gamma(eta["k"], eta["theta"])
        window = d.get("window", DEFAULT_WINDOW)
        return cls(
            n_targets=int(d.get("n_targets", 20)),
            n_perceivers=int(d.get("n_perceivers", 50)),
            grid_points=int(d.get("grid_points", 300)),
            eta_mode=mode,
            nu_align=float(d.get("nu_align", 30.0)),
            methods=tuple(d.get("methods", METHOD_LABELS)),
            seed=int(d.get("seed", 0)),
            window=None if window == "exhaustive" else int(window),
        )


@dataclass
class PairOutcome:
    i: int
    j: int
    eta: float
    metrics: Dict[str, PairMetrics]
    failures: Dict[str, str]


def simulate_pair(cfg: SimConfig, x: SampledFunction, i: int, j: int, *,
                  aligned_perceiver: Optional[Callable] = None,
                  warping: Optional[Callable] = None) -> PairOutcome:
    """Generate pair ``(i, j)`` and score every configured aligner on it.

    ``aligned_perceiver(x, rng)`` and ``warping(eta, rng, grid)`` replace the
    default generators (used to build degenerate pipelines in tests).
    """
    rng = stream(cfg.seed, _TAG_PAIR, i, j)
    make_a = aligned_perceiver or generate_aligned_perceiver
    make_psi = warping or generate_warping
    metrics, failures = {}, {}
    try:
        a = make_a(x, rng)
        eta = draw_eta(cfg.eta_mode, rng, x.grid.span)
        psi = make_psi(eta, rng, x.grid)
        y = apply_warping(a, psi)
        truth = invert_warping(psi)
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        msg = f"generation: {type(exc).__name__}: {exc}"
        return PairOutcome(i, j, float("nan"), {}, {m: msg for m in cfg.methods})
    for label, method in cfg.alignment_methods().items():
        try:
            res = align(x, y, method)
            metrics[label] = pair_metrics(x, a, res.aligned, truth, res.warping,
                                          res.phase_distance)
        except (ValueError, ArithmeticError) as exc:
            failures[label] = f"{type(exc).__name__}: {exc}"
    return PairOutcome(i, j, eta, metrics, failures)


def _run_target(args) -> List[PairOutcome]:
    cfg, i, hooks = args
    x = generate_target(stream(cfg.seed, _TAG_TARGET, i), cfg.grid_points)
    return [simulate_pair(cfg, x, i, j, **hooks) for j in range(cfg.n_perceivers)]


SUMMARY_METRICS = ("rho_a", "d_gamma", "d_q_a", "rho_x", "d_q_x",
                   "rho_gap", "dq_gap", "warp_amount", "phase_dist")


@dataclass
class CellSummary:
    """Mean/sd per metric for one (cell, method) plus the MSE of EA estimates."""

    stats: Dict[str, Tuple[float, float]]
    mse: float
    n_pairs: int
    n_failed: int

    def mean(self, metric: str) -> float:
        return self.stats[metric][0]

    def sd(self, metric: str) -> float:
        return self.stats[metric][1]


def _mean_sd(v: np.ndarray) -> Tuple[float, float]:
    if v.size == 0:
        return float("nan"), float("nan")
    sd = float(np.std(v, ddof=1)) if v.size > 1 else 0.0
    return float(np.mean(v)), sd


def summarize(outcomes: Sequence[PairOutcome], methods: Sequence[str]) -> Dict[str, CellSummary]:
    out = {}
    for label in methods:
        rows = [o.metrics[label] for o in outcomes if label in o.metrics]
        n_failed = sum(1 for o in outcomes if label in o.failures)
        cols = {
            "rho_a": [m.rho_a for m in rows],
            "d_gamma": [m.d_gamma for m in rows],
            "d_q_a": [m.d_q_a for m in rows],
            "rho_x": [m.rho_x for m in rows],
            "d_q_x": [m.d_q_x for m in rows],
            "rho_gap": [m.rho_x - m.rho_a for m in rows],
            "dq_gap": [m.d_q_x - m.d_q_a for m in rows],
            "warp_amount": [m.warp_amount for m in rows],
            "phase_dist": [m.phase_dist for m in rows],
        }
        stats = {k: _mean_sd(np.asarray(v, dtype=float)) for k, v in cols.items()}
        sq = np.asarray([(m.rho_ideal - m.rho_x) ** 2 for m in rows], dtype=float)
        mse = float(np.mean(sq)) if sq.size else float("nan")
        out[label] = CellSummary(stats, mse, len(rows), n_failed)
    return out


@dataclass
class SimulationReport:
    """Summaries keyed by ``(cell, method)``; ``configs`` keyed by cell."""

    cells: Dict[Tuple[str, str], CellSummary]
    configs: Dict[str, dict]
    failures: List[dict] = field(default_factory=list)

    def cell_labels(self) -> List[str]:
        return list(self.configs)

    def methods(self, cell: str) -> List[str]:
        return [m for (c, m) in self.cells if c == cell]

    def __getitem__(self, key: Tuple[str, str]) -> CellSummary:
        return self.cells[key]

    def merge(self, other: "SimulationReport") -> "SimulationReport":
        clash = set(self.configs) & set(other.configs)
        if clash:
            raise ValueError(f"cells present in both reports: {sorted(clash)}")
        return SimulationReport({**self.cells, **other.cells},
                                {**self.configs, **other.configs},
                                self.failures + other.failures)

    def rows(self) -> List[dict]:
        """One row per cell x method x metric, in table order."""
        out = []
        for (cell, method), s in self.cells.items():
            for metric in SUMMARY_METRICS:
                mean, sd = s.stats[metric]
                out.append({"cell": cell, "method": method, "metric": metric,
                            "mean": mean, "sd": sd, "n": s.n_pairs})
            out.append({"cell": cell, "method": method, "metric": "mse",
                        "mean": s.mse, "sd": None, "n": s.n_pairs})
        return out

    def as_dict(self) -> dict:
        cells = []
        for (cell, method), s in self.cells.items():
            cells.append({
                "cell": cell,
                "method": method,
                "n_pairs": s.n_pairs,
                "n_failed": s.n_failed,
                "mse": s.mse,
                "metrics": {k: {"mean": m, "sd": sd} for k, (m, sd) in s.stats.items()},
            })
        return {"cells": cells, "configs": self.configs, "failures": self.failures}


def run_simulation(cfg: SimConfig, jobs: int = 1, *,
                   aligned_perceiver: Optional[Callable] = None,
                   warping: Optional[Callable] = None) -> SimulationReport:
    """Run one cell of the benchmark (``n_targets x n_perceivers`` pairs).

    ``jobs > 1`` spreads targets over worker processes. Outcomes are collected
    by index before aggregation, so the report is the same for any ``jobs``.
    """
    hooks = {}
    if aligned_perceiver is not None:
        hooks["aligned_perceiver"] = aligned_perceiver
    if warping is not None:
        hooks["warping"] = warping
    tasks = [(cfg, i, hooks) for i in range(cfg.n_targets)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            per_target = list(pool.map(_run_target, tasks))
    else:
        per_target = [_run_target(t) for t in tasks]
    outcomes = [o for group in per_target for o in group]
    summary = summarize(outcomes, cfg.methods)
    failures = [{"i": o.i, "j": o.j, "method": m, "error": e}
                for o in outcomes for m, e in o.failures.items()]
    cells = {(cfg.cell, m): s for m, s in summary.items()}
    return SimulationReport(cells, {cfg.cell: cfg.as_dict()}, failures)


@dataclass
class EaLayout:
    """Synthetic empathic-accuracy study in the on-disk layout's shape.

    ``targets[stim]`` and ``perceivers[pid][stim]`` are on a common grid;
    ``aligned[pid][stim]`` holds the unwarped perceiver responses.
    """

    targets: Dict[str, SampledFunction]
    perceivers: Dict[str, Dict[str, SampledFunction]]
    aligned: Dict[str, Dict[str, SampledFunction]]
    warpings: Dict[str, Dict[str, WarpingFunction]]


def smooth_noise(rng: np.random.Generator, grid: UniformGrid, sd: float,
                 bandwidth: float) -> np.ndarray:
    """Gaussian-kernel-smoothed white noise with marginal sd close to ``sd``."""
    h_steps = bandwidth / grid.spacing
    inflate = math.sqrt(2.0 * math.sqrt(math.pi) * h_steps)
    white = SampledFunction(grid, rng.standard_normal(grid.n_points) * sd * inflate)
    return kernel_smooth(white, bandwidth).values


def generate_ea_layout(seed: int, n_perceivers: int = 4, n_stimuli: int = 3, *,
                       n_points: int = 300, duration: float = 120.0, eta: float = 8.0,
                       beta: Tuple[float, float] = (1.0, 0.8),
                       sigma: float = 0.5, sigma_b0: float = 0.6, sigma_b1: float = 0.3,
                       noise_bandwidth: float = 2.0) -> EaLayout:
    """Perceivers following the random intercept/slope model, then warped.

    Stimulus ``j`` gets a target ``x_j`` (kernel-smoothed walk, standardized).
    Perceiver ``p`` responds with ``beta0 + beta1 x_j + b0 + b1 x_j + e`` where
    ``e`` is smooth noise of sd ``sigma``; the response is then warped by a
    generated warping with limit ``eta`` seconds.
    """
    grid = UniformGrid(0.0, duration, n_points)
    targets = {}
    for j in range(n_stimuli):
        rng = stream(seed, _TAG_STIMULUS, j)
        raw = random_walk(rng, n_points)
        sm = kernel_smooth(SampledFunction(grid, raw), TARGET_BANDWIDTH * grid.spacing)
        v = sm.values
        targets[f"s{j + 1}"] = SampledFunction(grid, (v - v.mean()) / v.std())
    perceivers, aligned, warpings = {}, {}, {}
    for p in range(n_perceivers):
        pid = f"p{p + 1:03d}"
        perceivers[pid], aligned[pid], warpings[pid] = {}, {}, {}
        for j, (stim, x) in enumerate(targets.items()):
            rng = stream(seed, _TAG_PERCEIVER, p, j)
            b0 = rng.normal(0.0, sigma_b0)
            b1 = rng.normal(0.0, sigma_b1)
            e = smooth_noise(rng, grid, sigma, noise_bandwidth)
            a = x.with_values(beta[0] + b0 + (beta[1] + b1) * x.values + e)
            psi = generate_warping(eta, rng, grid)
            aligned[pid][stim] = a
            perceivers[pid][stim] = apply_warping(a, psi)
            warpings[pid][stim] = psi
    return EaLayout(targets, perceivers, aligned, warpings)
