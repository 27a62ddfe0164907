"""Square-root velocity functions and the distances built on them."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (GridMismatchError, SampledFunction, UniformGrid, WarpingFunction,
                   derivative, integrate, unit_points)

__all__ = ["Srvf", "to_srvf", "group_action", "srvf_l2_distance",
           "srvf_sq_distance", "warping_derivative", "phase_distance"]

_EPS = np.finfo(float).eps


@dataclass(frozen=True, eq=False)
class Srvf:
    """SRVF samples on the unit grid."""

    grid: UniformGrid
    values: np.ndarray

    def __post_init__(self):
        if not self.grid.is_unit:
            raise ValueError("SRVFs live on the unit grid")
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n_points,) or not np.all(np.isfinite(v)):
            raise ValueError("SRVF values must be finite and match the grid")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n_points(self) -> int:
        return self.grid.n_points

    def sq_norm(self) -> float:
        return integrate(self.values ** 2, 1.0 / self.grid.T)


def to_srvf(f: SampledFunction) -> Srvf:
    """``q = sign(f') sqrt(|f'|)`` with ``f'`` taken in normalized time."""
    if f.n_points < 3:
        raise ValueError("SRVF needs at least 3 points")
    t = unit_points(f.n_points)
    df = derivative(np.asarray(f.values, dtype=float), t)
    return Srvf(UniformGrid.unit(f.n_points), np.sign(df) * np.sqrt(np.abs(df)))


def warping_derivative(g: WarpingFunction) -> np.ndarray:
    """Finite-difference ``g'``, floored at zero (flat pieces give rounding noise)."""
    return np.maximum(derivative(g.values, unit_points(g.n_points)), 0.0)


def group_action(q: Srvf, g: WarpingFunction) -> Srvf:
    """``(q o g) * sqrt(g')``: the SRVF of ``f o g`` when ``q`` is the SRVF of ``f``."""
    if q.n_points != g.n_points:
        raise GridMismatchError("SRVF and warping live on different grids")
    qg = np.interp(g.values, unit_points(q.n_points), q.values)
    return Srvf(q.grid, qg * np.sqrt(warping_derivative(g)))


def srvf_sq_distance(q1: Srvf, q2: Srvf) -> float:
    """Squared L2 distance, trapezoid rule."""
    if q1.n_points != q2.n_points:
        raise GridMismatchError("SRVFs live on different grids")
    return integrate((q1.values - q2.values) ** 2, 1.0 / q1.grid.T)


def srvf_l2_distance(q1: Srvf, q2: Srvf) -> float:
    return float(np.sqrt(srvf_sq_distance(q1, q2)))


def phase_distance(g: WarpingFunction) -> float:
    """Arc length between ``sqrt(g')`` and the constant 1 on the unit sphere.

    The trapezoid rule applied to the central-difference derivative integrates
    ``g'`` to exactly 1, so the inner product is at most 1 up to rounding; a
    residual ``1 - <.,.>`` of a few ulps is treated as zero.
    """
    ip = integrate(np.sqrt(warping_derivative(g)), 1.0 / g.grid.T)
    ip = min(max(ip, -1.0), 1.0)
    if 1.0 - ip <= 8 * _EPS:
        return 0.0
    return float(np.arccos(ip))
