"""Empathic-accuracy workflows on a set of targets and perceivers.

``corr`` mode: correlation with the target before and after alignment, plus
warping amounts, per perceiver and stimulus. ``lmm`` mode: one mixed-model
fit per perceiver on the aligned responses.

Pairs whose identity-warping correlation falls below a threshold are screened
out before anything else and reported in the dropped log.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional


from .align import DEFAULT_WINDOW, AlignmentMethod, align
from .core import NormalizedBound, SampledFunction, WarpingFunction
from .lmm import MixedModelData, fit_metrics, fit_reml
from .metrics import pearson, warp_amount
from .preprocess import SmoothingSpec, filter_negative_correlation, regrid, smooth

__all__ = [
    "StudyConfig",
    "PairRecord",
    "DroppedPair",
    "StudyResult",
    "prepare",
    "method_for",
    "run_alignment",
    "run_study",
]

METHOD_KINDS = ("none", "fixed", "srvf")


@dataclass(frozen=True)
class StudyConfig:
    """How to preprocess and align every perceiver.

    ``nu`` is in native time units; ``nu=None`` with ``method="srvf"`` is the
    unpenalized aligner.
    """

    method: str = "srvf"
    nu: Optional[float] = 8.0
    window: Optional[int] = DEFAULT_WINDOW
    grid: int = 300
    smoothing: SmoothingSpec = field(default_factory=SmoothingSpec)
    min_identity_corr: float = 0.0

    def __post_init__(self):
        if self.method not in METHOD_KINDS:
            raise ValueError(f"method must be one of {METHOD_KINDS}")
        if self.method == "fixed" and self.nu is None:
            raise ValueError("fixed delay needs a bound")
        if self.nu is not None and not self.nu > 0:
            raise ValueError("nu must be positive")
        if self.grid < 3:
            raise ValueError("grid needs at least 3 points")

    def describe(self) -> dict:
        return {
            "method": self.method,
            "nu_seconds": self.nu,
            "window": "exhaustive" if self.window is None else self.window,
            "grid": self.grid,
            "smoothing": self.smoothing.describe(),
            "min_identity_corr": self.min_identity_corr,
        }


def prepare(f: SampledFunction, cfg: StudyConfig, t0=None, tT=None) -> SampledFunction:
    """Smooth on the native samples, then interpolate onto the analysis grid."""
    return regrid(smooth(f, cfg.smoothing), cfg.grid, t0, tT)


def method_for(cfg: StudyConfig, span: float) -> AlignmentMethod:
    if cfg.method == "none":
        return AlignmentMethod.identity()
    bound = None if cfg.nu is None else NormalizedBound(cfg.nu, span)
    if cfg.method == "fixed":
        return AlignmentMethod.fixed_delay(bound)
    return AlignmentMethod.srvf(bound, cfg.window)


@dataclass
class PairRecord:
    perceiver: str
    stimulus: str
    rho_pre: float
    rho_post: float
    warp_amount: float
    phase_distance: float
    sup_deviation: float
    cost: float
    target: SampledFunction = field(repr=False)
    aligned: SampledFunction = field(repr=False)
    warping: WarpingFunction = field(repr=False)

    def row(self) -> list:
        return [self.perceiver, self.stimulus, self.rho_pre, self.rho_post,
                self.warp_amount, self.phase_distance, self.sup_deviation, self.cost]


PAIR_COLUMNS = ["perceiver", "stimulus", "rho_pre", "rho_post", "warp_amount",
                "phase_distance", "sup_deviation_seconds", "cost"]


@dataclass(frozen=True)
class DroppedPair:
    perceiver: str
    stimulus: str
    rho: float
    reason: str


@dataclass
class StudyResult:
    pairs: List[PairRecord]
    dropped: List[DroppedPair]
    fits: Dict[str, dict] = field(default_factory=dict)
    skipped: Dict[str, str] = field(default_factory=dict)


def _align_perceiver(args):
    pid, ratings, targets, cfg = args  # ratings already on the analysis grid
    pairs = []
    for stim, x in targets.items():
        y = ratings[stim]
        res = align(x, y, method_for(cfg, x.grid.span))
        pairs.append(PairRecord(
            perceiver=pid, stimulus=stim,
            rho_pre=pearson(x, y), rho_post=pearson(x, res.aligned),
            warp_amount=warp_amount(res.warping), phase_distance=res.phase_distance,
            sup_deviation=res.sup_deviation, cost=res.cost,
            target=x, aligned=res.aligned, warping=res.warping))
    return pairs


def _check_support(name: str, f: SampledFunction, x: SampledFunction) -> None:
    tol = 1e-9 * x.grid.span
    if abs(f.grid.t0 - x.grid.t0) > tol or abs(f.grid.tT - x.grid.tT) > tol:
        raise ValueError(
            f"{name}: observed on [{f.grid.t0:g}, {f.grid.tT:g}], "
            f"target on [{x.grid.t0:g}, {x.grid.tT:g}]")


def run_alignment(targets: Dict[str, SampledFunction],
                  perceivers: Dict[str, Dict[str, SampledFunction]],
                  cfg: StudyConfig, jobs: int = 1):
    """Screen, preprocess and align every (perceiver, stimulus) pair.

    Returns the aligned pair records (perceiver order, then stimulus order)
    and the screened-out pairs.
    """
    prepared = {s: prepare(x, cfg) for s, x in targets.items()}
    kept: Dict[str, Dict[str, SampledFunction]] = {}
    dropped: List[DroppedPair] = []
    for pid, ratings in perceivers.items():
        stims = list(targets)
        for s in stims:
            _check_support(f"{pid}/{s}", ratings[s], targets[s])
        ys = [prepare(ratings[s], cfg, prepared[s].grid.t0, prepared[s].grid.tT) for s in stims]
        keep, drop = filter_negative_correlation(
            [(prepared[s], y) for s, y in zip(stims, ys)], cfg.min_identity_corr)
        dropped += [DroppedPair(pid, stims[d.index], d.rho, d.reason) for d in drop]
        kept[pid] = {stims[k.index]: ys[k.index] for k in keep}
    tasks = [(pid, r, {s: prepared[s] for s in r}, cfg) for pid, r in kept.items() if r]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            groups = list(pool.map(_align_perceiver, tasks))
    else:
        groups = [_align_perceiver(t) for t in tasks]
    return [p for g in groups for p in g], dropped


def _fit_perceiver(pairs: List[PairRecord], seed: int = 0) -> dict:
    data = MixedModelData(tuple(p.target for p in pairs), tuple(p.aligned for p in pairs),
                          tuple(p.warping for p in pairs))
    fit = fit_reml(data, seed=seed)
    mean_phase, vertical = fit_metrics(data, fit)
    out = fit.as_dict()
    out["stimuli"] = [p.stimulus for p in pairs]
    out["mean_phase"] = mean_phase
    out["vertical"] = vertical
    return out


def run_study(targets, perceivers, cfg: StudyConfig, mode: str = "corr",
              jobs: int = 1, seed: int = 0) -> StudyResult:
    if mode not in ("corr", "lmm"):
        raise ValueError("mode must be 'corr' or 'lmm'")
    pairs, dropped = run_alignment(targets, perceivers, cfg, jobs)
    result = StudyResult(pairs, dropped)
    if mode == "lmm":
        by_pid: Dict[str, List[PairRecord]] = {}
        for p in pairs:
            by_pid.setdefault(p.perceiver, []).append(p)
        for pid in perceivers:
            group = by_pid.get(pid, [])
            if len(group) < 2:
                result.skipped[pid] = f"{len(group)} stimulus pairs left after screening; need 2"
                continue
            result.fits[pid] = _fit_perceiver(group, seed)
    return result
