"""Pairwise aligners: identity, optimal fixed delay, and (penalized) SRVF.

The penalized aligner solves

    min ||q_x - (q_y, g)||^2   subject to   sup |g(t) - t| <= nu

by dynamic programming over lattice paths whose nodes all satisfy the bound.
Between two feasible nodes ``g(t) - t`` is linear, so node feasibility is
enough for the whole path.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _dp
from .core import (GridMismatchError, NormalizedBound, SampledFunction, WarpingFunction,
                   apply_warping, identity_warping, unit_points)
from .srvf import group_action, phase_distance, srvf_sq_distance, to_srvf

__all__ = [
    "AlignmentMethod",
    "AlignmentResult",
    "DEFAULT_WINDOW",
    "EXHAUSTIVE_MAX_T",
    "align",
    "align_identity",
    "align_fixed_delay",
    "align_srvf",
    "fixed_delay_warping",
    "sup_deviation",
]

DEFAULT_WINDOW = 7
EXHAUSTIVE_MAX_T = 60


@dataclass(frozen=True)
class AlignmentMethod:
    """Which aligner to run.

    ``kind`` is ``"identity"``, ``"fixed_delay"`` or ``"srvf"``. For ``srvf``,
    ``bound=None`` is the unpenalized problem and ``window=None`` means the
    exhaustive predecessor set.
    """

    kind: str
    bound: Optional[NormalizedBound] = None
    window: Optional[int] = DEFAULT_WINDOW

    def __post_init__(self):
        if self.kind not in ("identity", "fixed_delay", "srvf"):
            raise ValueError(f"unknown alignment method {self.kind!r}")
        if self.kind == "fixed_delay" and self.bound is None:
            raise ValueError("fixed-delay alignment needs a bound")
        if self.window is not None and self.window < 1:
            raise ValueError("window must be at least 1")

    @classmethod
    def identity(cls) -> "AlignmentMethod":
        return cls("identity", None, None)

    @classmethod
    def fixed_delay(cls, bound: NormalizedBound) -> "AlignmentMethod":
        return cls("fixed_delay", bound, None)

    @classmethod
    def srvf(cls, bound: Optional[NormalizedBound] = None,
             window: Optional[int] = DEFAULT_WINDOW) -> "AlignmentMethod":
        return cls("srvf", bound, window)

    @property
    def label(self) -> str:
        if self.kind == "srvf":
            return "unpenalized_srvf" if self.bound is None else "penalized_srvf"
        return {"identity": "no_alignment", "fixed_delay": "optimal_fixed"}[self.kind]

    def describe(self) -> dict:
        out = {"kind": self.kind, "label": self.label}
        if self.bound is not None:
            out["nu_native"] = self.bound.nu_native
            out["nu_norm"] = self.bound.nu_norm
        if self.kind == "srvf":
            out["window"] = "exhaustive" if self.window is None else self.window
            out["quadrature"] = "trapezoid"
        return out


@dataclass(frozen=True, eq=False)
class AlignmentResult:
    """Output of an aligner.

    ``cost`` is the objective the aligner minimized: the DP path cost for
    SRVF alignment, ``||q_x - (q_y, g)||^2`` (trapezoid) otherwise.
    ``sup_deviation`` is in the native units of ``x``.
    """

    warping: WarpingFunction
    aligned: SampledFunction
    cost: float
    method: AlignmentMethod
    sup_deviation: float
    phase_distance: float
    nodes: Optional[np.ndarray] = field(default=None)
    delay: Optional[float] = None


def _check_pair(x: SampledFunction, y: SampledFunction) -> None:
    if not x.grid.same_as(y.grid):
        raise GridMismatchError(
            f"target grid {x.grid} and perceiver grid {y.grid} differ")


def native_span(f: SampledFunction) -> float:
    return (f.native or f.grid).span


def _check_bound(x: SampledFunction, bound: Optional[NormalizedBound]) -> None:
    if bound is None:
        return
    span = native_span(x)
    if abs(bound.span - span) > 1e-9 * span:
        raise ValueError(
            f"bound was built for a domain of length {bound.span}, "
            f"the target spans {span}")


def sup_deviation(g: WarpingFunction, span: float = 1.0) -> float:
    """``max_m |g(t_m) - t_m|`` scaled by the native domain length ``span``.

    ``g - id`` is linear between samples, so the grid maximum is the supremum.
    """
    return float(np.max(np.abs(g.values - unit_points(g.n_points))) * span)


def _finish(x, y, g, cost, method, **extra) -> AlignmentResult:
    return AlignmentResult(
        warping=g,
        aligned=apply_warping(y, g),
        cost=float(cost),
        method=method,
        sup_deviation=sup_deviation(g, native_span(x)),
        phase_distance=phase_distance(g),
        **extra,
    )


def align_identity(x: SampledFunction, y: SampledFunction) -> AlignmentResult:
    _check_pair(x, y)
    g = identity_warping(x.n_points)
    cost = srvf_sq_distance(to_srvf(x), to_srvf(y))
    return _finish(x, y, g, cost, AlignmentMethod.identity(), delay=0.0)


def fixed_delay_warping(n_points: int, steps: int) -> WarpingFunction:
    """``g(0) = 0``, ``g(t) = t + delta`` inside, capped at 1; ``delta = steps/T``."""
    T = n_points - 1
    m = np.arange(n_points)
    u = np.minimum(m + steps, T).astype(float)
    u[0] = 0.0
    return WarpingFunction.from_values(u / T)


def align_fixed_delay(x: SampledFunction, y: SampledFunction,
                      bound: NormalizedBound) -> AlignmentResult:
    """Best constant delay ``0 <= delta <= nu`` over multiples of the grid step.

    Ties go to the smaller delay.
    """
    _check_pair(x, y)
    _check_bound(x, bound)
    T = x.grid.T
    qx, qy = to_srvf(x), to_srvf(y)
    max_steps = min(bound.lattice_band(T), T - 1)
    best, best_d = np.inf, 0
    for d in range(max_steps + 1):
        c = srvf_sq_distance(qx, group_action(qy, fixed_delay_warping(x.n_points, d)))
        if c < best:
            best, best_d = c, d
    g = fixed_delay_warping(x.n_points, best_d)
    return _finish(x, y, g, best, AlignmentMethod.fixed_delay(bound),
                   delay=best_d * native_span(x) / T)


def align_srvf(x: SampledFunction, y: SampledFunction,
               bound: Optional[NormalizedBound] = None,
               window: Optional[int] = DEFAULT_WINDOW) -> AlignmentResult:
    """SRVF alignment of ``y`` to ``x``, optionally under a sup-norm bound.

    Parameters
    ----------
    x, y : SampledFunction
        Target and perceiver on a common grid (native units allowed).
    bound : NormalizedBound or None
        Limit on ``|g(t) - t|``; ``None`` solves the unpenalized problem.
    window : int or None
        Largest step, in grid points, along either axis of the lattice.
        ``None`` admits every earlier node (only for T <= 60).

    Returns
    -------
    AlignmentResult
        ``nodes`` holds the lattice path as ``(k, l)`` index pairs.
    """
    _check_pair(x, y)
    _check_bound(x, bound)
    n = x.n_points
    T = n - 1
    if n < 3:
        raise ValueError("SRVF alignment needs at least 3 points")
    if window is None and T > EXHAUSTIVE_MAX_T:
        raise ValueError(
            f"exhaustive predecessor sets are limited to T <= {EXHAUSTIVE_MAX_T}; "
            f"got T = {T}, pass a window")
    band = n if bound is None else bound.lattice_band(T)
    win = n if window is None else int(window)
    qx = np.ascontiguousarray(to_srvf(x).values)
    qy = np.ascontiguousarray(to_srvf(y).values)
    H, pk, pl = _dp.solve(qx, qy, band, win)
    nodes = _dp.backtrace(pk, pl)
    g = WarpingFunction.from_values(_dp.nodes_to_values(nodes, n))
    return _finish(x, y, g, H[T, T], AlignmentMethod.srvf(bound, window), nodes=nodes)


def align(x: SampledFunction, y: SampledFunction, method: AlignmentMethod) -> AlignmentResult:
    if method.kind == "identity":
        return align_identity(x, y)
    if method.kind == "fixed_delay":
        return align_fixed_delay(x, y, method.bound)
    return align_srvf(x, y, method.bound, method.window)
