"""Grids, sampled functions and warping functions.

Everything downstream works on the unit interval. Native time units survive
only as grid metadata, so results can be reported back in seconds (or
whatever the input files used).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "UniformGrid",
    "SampledFunction",
    "WarpingFunction",
    "NormalizedBound",
    "GridMismatchError",
    "unit_points",
    "derivative",
    "integrate",
    "identity_warping",
    "rescale_to_unit",
    "apply_warping",
    "invert_warping",
    "compose_warpings",
]


class GridMismatchError(ValueError):
    """Two objects that must share a grid do not."""


def unit_points(n_points: int) -> np.ndarray:
    """Grid points of the unit interval, ``m / (n_points - 1)``.

    Every module builds normalized abscissae through this function so that
    warpings produced on integer lattice nodes coincide bit-for-bit with the
    grid (the identity warping is then exact).
    """
    return np.arange(n_points, dtype=float) / (n_points - 1)


def derivative(values: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Central differences inside, one-sided differences at the two ends.

    The same difference operator is applied to ``values`` and to ``t`` and the
    ratio is returned. On a uniform grid this equals dividing by the spacing,
    but it keeps the derivative of the identity exactly 1.
    """
    return np.gradient(values) / np.gradient(t)


def integrate(values: np.ndarray, dt: float) -> float:
    """Composite trapezoid rule with constant spacing ``dt``."""
    return float(np.trapezoid(values, dx=dt))


@dataclass(frozen=True)
class UniformGrid:
    """``n_points`` equally spaced samples of ``[t0, tT]``, endpoints included."""

    t0: float
    tT: float
    n_points: int

    def __post_init__(self):
        if not (np.isfinite(self.t0) and np.isfinite(self.tT)):
            raise ValueError("grid endpoints must be finite")
        if not self.t0 < self.tT:
            raise ValueError(f"grid requires t0 < tT, got [{self.t0}, {self.tT}]")
        if int(self.n_points) != self.n_points or self.n_points < 2:
            raise ValueError(f"grid needs at least 2 points, got {self.n_points}")
        object.__setattr__(self, "n_points", int(self.n_points))

    @classmethod
    def unit(cls, n_points: int) -> "UniformGrid":
        return cls(0.0, 1.0, n_points)

    @property
    def span(self) -> float:
        return self.tT - self.t0

    @property
    def spacing(self) -> float:
        return self.span / (self.n_points - 1)

    @property
    def T(self) -> int:
        """Number of intervals (lattice size of the alignment problem)."""
        return self.n_points - 1

    @property
    def is_unit(self) -> bool:
        return self.t0 == 0.0 and self.tT == 1.0

    def points(self) -> np.ndarray:
        """Native-unit sample times."""
        if self.is_unit:
            return unit_points(self.n_points)
        return self.t0 + self.span * unit_points(self.n_points)

    def unit_points(self) -> np.ndarray:
        return unit_points(self.n_points)

    def to_unit(self, t):
        return (np.asarray(t, dtype=float) - self.t0) / self.span

    def from_unit(self, u):
        return self.t0 + self.span * np.asarray(u, dtype=float)

    def same_as(self, other: "UniformGrid", rtol: float = 1e-9) -> bool:
        if self.n_points != other.n_points:
            return False
        scale = max(abs(self.span), abs(other.span))
        return (abs(self.t0 - other.t0) <= rtol * scale
                and abs(self.tT - other.tT) <= rtol * scale)


def _as_values(values, n_points: int, what: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{what} values must be one-dimensional")
    if arr.shape[0] != n_points:
        raise ValueError(
            f"{what} has {arr.shape[0]} values for a {n_points}-point grid")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} values contain non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SampledFunction:
    """A real function observed on a uniform grid.

    ``native`` records the original grid when the function was rescaled to the
    unit interval by :func:`rescale_to_unit`.
    """

    grid: UniformGrid
    values: np.ndarray
    native: Optional[UniformGrid] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "values",
                           _as_values(self.values, self.grid.n_points, "function"))

    @classmethod
    def from_values(cls, values, t0: float = 0.0, tT: float = 1.0) -> "SampledFunction":
        values = np.asarray(values, dtype=float)
        return cls(UniformGrid(t0, tT, values.shape[0]), values)

    @property
    def n_points(self) -> int:
        return self.grid.n_points

    def with_values(self, values) -> "SampledFunction":
        return SampledFunction(self.grid, values, self.native)

    def __call__(self, t):
        """Linear interpolation at native times ``t``."""
        return np.interp(t, self.grid.points(), self.values)


@dataclass(frozen=True, eq=False)
class WarpingFunction:
    """Boundary-preserving nondecreasing map of [0, 1], sampled on a grid.

    Piecewise linear between samples. Flat pieces are allowed.
    """

    grid: UniformGrid
    values: np.ndarray

    def __post_init__(self):
        if not self.grid.is_unit:
            raise ValueError("warping functions live on the unit grid")
        v = _as_values(self.values, self.grid.n_points, "warping")
        if v[0] != 0.0 or v[-1] != 1.0:
            raise ValueError(
                f"warping must satisfy g(0)=0 and g(1)=1, got {v[0]!r}, {v[-1]!r}")
        if np.any(np.diff(v) < 0):
            raise ValueError("warping must be nondecreasing")
        if v.min() < 0.0 or v.max() > 1.0:
            raise ValueError("warping values must lie in [0, 1]")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_values(cls, values) -> "WarpingFunction":
        values = np.asarray(values, dtype=float)
        return cls(UniformGrid.unit(values.shape[0]), values)

    @classmethod
    def repaired(cls, values) -> "WarpingFunction":
        """Build from values carrying float noise: clip, pin ends, enforce order."""
        v = np.clip(np.asarray(values, dtype=float), 0.0, 1.0)
        v[0], v[-1] = 0.0, 1.0
        v = np.maximum.accumulate(v)
        return cls.from_values(v)

    @property
    def n_points(self) -> int:
        return self.grid.n_points

    def is_identity(self) -> bool:
        return bool(np.array_equal(self.values, unit_points(self.n_points)))

    def __call__(self, t):
        return np.interp(t, unit_points(self.n_points), self.values)


def identity_warping(n_points: int) -> WarpingFunction:
    return WarpingFunction(UniformGrid.unit(n_points), unit_points(n_points))


@dataclass(frozen=True)
class NormalizedBound:
    """Sup-norm limit on ``|g(t) - t|``, in native units and on [0, 1].

    ``span`` is the native length of the domain the limit refers to.
    Unbounded alignment is represented by passing ``None`` instead of a bound.
    """

    nu_native: float
    span: float = 1.0

    def __post_init__(self):
        if not self.span > 0:
            raise ValueError("bound span must be positive")
        if not (self.nu_native > 0 and np.isfinite(self.nu_native)):
            raise ValueError(f"bound must be positive and finite, got {self.nu_native}")

    @classmethod
    def from_norm(cls, nu_norm: float, span: float = 1.0) -> "NormalizedBound":
        return cls(nu_norm * span, span)

    @property
    def nu_norm(self) -> float:
        return self.nu_native / self.span

    def lattice_band(self, T: int) -> int:
        """Largest integer ``b`` with ``b / T <= nu_norm``.

        A relative slack of 1e-9 keeps a bound equal to an observed deviation
        (itself a multiple of 1/T) from being rounded away.
        """
        return int(np.floor(self.nu_norm * T * (1.0 + 1e-9) + 1e-12))


def rescale_to_unit(f: SampledFunction) -> SampledFunction:
    """Relabel the grid of ``f`` as [0, 1]; the original grid goes to ``native``."""
    if f.grid.is_unit:
        return f
    native = f.native if f.native is not None else f.grid
    return SampledFunction(UniformGrid.unit(f.n_points), f.values, native)


def _check_warping_grid(n_points: int, g: WarpingFunction) -> None:
    if g.n_points != n_points:
        raise GridMismatchError(
            f"warping has {g.n_points} points, function has {n_points}")


def apply_warping(f: SampledFunction, g: WarpingFunction) -> SampledFunction:
    """Return ``f o g`` on the grid of ``f``; ``f`` is interpolated linearly.

    Both are read on the normalized domain, so ``f`` may carry native units.
    """
    _check_warping_grid(f.n_points, g)
    values = np.interp(g.values, unit_points(f.n_points), f.values)
    return f.with_values(values)


def invert_warping(g: WarpingFunction) -> WarpingFunction:
    """Piecewise-linear inverse of ``g`` resampled on its own grid.

    A level attained on a flat piece of ``g`` maps to the left end of that
    piece.
    """
    t = unit_points(g.n_points)
    v = g.values
    idx = np.searchsorted(v, t, side="left")
    idx = np.clip(idx, 0, g.n_points - 1)
    out = t[idx].copy()
    inner = (idx > 0) & (v[idx] != t)
    i = idx[inner]
    lo, hi = v[i - 1], v[i]
    out[inner] = t[i - 1] + (t[inner] - lo) / (hi - lo) * (t[i] - t[i - 1])
    return WarpingFunction.repaired(out)


def compose_warpings(g1: WarpingFunction, g2: WarpingFunction) -> WarpingFunction:
    """``t -> g1(g2(t))``."""
    if g1.n_points != g2.n_points:
        raise GridMismatchError("warpings live on different grids")
    return WarpingFunction.repaired(
        np.interp(g2.values, unit_points(g1.n_points), g1.values))
