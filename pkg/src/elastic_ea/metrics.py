"""Evaluation metrics for alignments with a known ground truth."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .core import GridMismatchError, SampledFunction, WarpingFunction, integrate, unit_points
from .srvf import srvf_sq_distance, to_srvf

__all__ = [
    "UndefinedCorrelationError",
    "PairMetrics",
    "pearson",
    "warping_l2",
    "mse_ea",
    "overalignment_diagnostics",
    "pair_metrics",
]


class UndefinedCorrelationError(ValueError):
    """Correlation with a zero-variance sequence."""


def _values(f):
    return np.asarray(getattr(f, "values", f), dtype=float)


def pearson(f, g) -> float:
    """Sample Pearson correlation of two sampled functions (or plain arrays)."""
    a, b = _values(f), _values(g)
    if a.shape != b.shape:
        raise GridMismatchError("correlation needs equally long sequences")
    a = a - a.mean()
    b = b - b.mean()
    saa, sbb = float(a @ a), float(b @ b)
    if saa == 0.0 or sbb == 0.0:
        raise UndefinedCorrelationError("correlation undefined for a constant sequence")
    r = float(a @ b) / np.sqrt(saa * sbb)
    return float(min(1.0, max(-1.0, r)))


def warping_l2(g1: WarpingFunction, g2: WarpingFunction) -> float:
    """Squared L2 distance between two warpings, ``int (g1 - g2)^2 dt``."""
    if g1.n_points != g2.n_points:
        raise GridMismatchError("warpings live on different grids")
    return integrate((g1.values - g2.values) ** 2, 1.0 / (g1.n_points - 1))


def warp_amount(g: WarpingFunction) -> float:
    return integrate((g.values - unit_points(g.n_points)) ** 2, 1.0 / (g.n_points - 1))


def mse_ea(targets: Sequence, aligned_truth: Sequence, estimates: Sequence) -> float:
    """Mean of ``(rho(x_i, a_i) - rho(x_i, yhat_i))^2`` over index-aligned triples."""
    if not (len(targets) == len(aligned_truth) == len(estimates)):
        raise ValueError("targets, aligned responses and estimates differ in length")
    if len(targets) == 0:
        raise ValueError("no pairs")
    gaps = [pearson(x, a) - pearson(x, e)
            for x, a, e in zip(targets, aligned_truth, estimates)]
    return float(np.mean(np.square(gaps)))


@dataclass(frozen=True)
class PairMetrics:
    rho_a: float
    rho_x: float
    d_gamma: float
    d_q_a: float
    d_q_x: float
    warp_amount: float
    phase_dist: float
    rho_ideal: float = float("nan")

    def as_dict(self) -> dict:
        return asdict(self)


def overalignment_diagnostics(m: PairMetrics):
    """``(rho_x - rho_a, d_q_x - d_q_a)``.

    A large positive first entry together with a large negative second one
    means the estimate was pulled onto the target (over-alignment); the
    opposite signs mean under-alignment.
    """
    return m.rho_x - m.rho_a, m.d_q_x - m.d_q_a


def pair_metrics(x: SampledFunction, a: SampledFunction, estimate: SampledFunction,
                 truth: WarpingFunction, warping: WarpingFunction,
                 phase_dist: float) -> PairMetrics:
    """All per-pair metrics of one alignment against its ground truth."""
    q_hat = to_srvf(estimate)
    return PairMetrics(
        rho_a=pearson(a, estimate),
        rho_x=pearson(x, estimate),
        d_gamma=warping_l2(truth, warping),
        d_q_a=srvf_sq_distance(to_srvf(a), q_hat),
        d_q_x=srvf_sq_distance(to_srvf(x), q_hat),
        warp_amount=warp_amount(warping),
        phase_dist=phase_dist,
        rho_ideal=pearson(x, a),
    )
