"""Smoothing, regridding and the negative-correlation data filter."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence, Union

import numpy as np
from scipy.linalg import eigh, solveh_banded

from .core import SampledFunction, UniformGrid

__all__ = [
    "SmoothingSpec",
    "kernel_smooth",
    "spline_smooth",
    "SplineFit",
    "gcv_lambda_grid",
    "regrid",
    "smooth",
    "PairScreen",
    "filter_negative_correlation",
]

GCV_GRID_SIZE = 61
GCV_LOG10_RANGE = (-8.0, 4.0)


@dataclass(frozen=True)
class SmoothingSpec:
    """One of ``none``, ``kernel`` (Gaussian sd ``bandwidth`` in native units)
    or ``spline`` (penalty ``lam``; ``None`` selects it by GCV)."""

    method: str = "none"
    bandwidth: Optional[float] = None
    lam: Optional[float] = None

    def __post_init__(self):
        if self.method not in ("none", "kernel", "spline"):
            raise ValueError(f"unknown smoothing method {self.method!r}")
        if self.method == "kernel" and not (self.bandwidth and self.bandwidth > 0):
            raise ValueError("kernel smoothing needs a positive bandwidth")
        if self.method == "spline" and self.lam is not None and self.lam < 0:
            raise ValueError("spline penalty must be nonnegative")

    @classmethod
    def parse(cls, text: str) -> "SmoothingSpec":
        """Parse ``none``, ``spline``, ``spline:LAM`` or ``kernel:H``."""
        name, _, arg = text.partition(":")
        if name == "none" and not arg:
            return cls()
        if name == "kernel":
            return cls("kernel", bandwidth=float(arg))
        if name == "spline":
            if not arg or arg == "gcv":
                return cls("spline")
            return cls("spline", lam=float(arg))
        raise ValueError(f"bad smoothing spec {text!r}")

    def describe(self) -> dict:
        out = {"method": self.method}
        if self.method == "kernel":
            out["bandwidth"] = self.bandwidth
            out["kernel"] = "gaussian, bandwidth taken as the standard deviation"
        if self.method == "spline":
            out["lambda"] = "gcv" if self.lam is None else self.lam
            out["lambda_selection"] = (
                f"GCV over {GCV_GRID_SIZE} log-spaced values, "
                f"10^{GCV_LOG10_RANGE[0]:g}..10^{GCV_LOG10_RANGE[1]:g} x n/tr(K)")
        return out


@lru_cache(maxsize=32)
def _gaussian_weights(n_points: int, h_steps: float) -> np.ndarray:
    idx = np.arange(n_points, dtype=float)
    z = (idx[:, None] - idx[None, :]) / h_steps
    w = np.exp(-0.5 * z * z)
    w /= w.sum(axis=1, keepdims=True)
    w.setflags(write=False)
    return w


def kernel_smooth(f: SampledFunction, bandwidth: float) -> SampledFunction:
    """Nadaraya-Watson smoother with a full-support Gaussian kernel.

    Parameters
    ----------
    f : SampledFunction
        Function to smooth.
    bandwidth : float
        Kernel standard deviation in the native units of ``f.grid``.
    """
    if not bandwidth > 0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth}")
    w = _gaussian_weights(f.n_points, float(bandwidth / f.grid.spacing))
    return f.with_values(w @ f.values)


def _reinsch_bands(t: np.ndarray):
    """Banded Q^T Q and R of the natural cubic spline penalty (Green & Silverman)."""
    h = np.diff(t)
    n = t.shape[0]
    # Q is n x (n-2); column j has 1/h[j], -1/h[j]-1/h[j+1], 1/h[j+1] on rows j..j+2
    a = 1.0 / h[:-1]
    b = -1.0 / h[:-1] - 1.0 / h[1:]
    c = 1.0 / h[1:]
    m = n - 2
    qtq = np.zeros((3, m))  # upper banded form for solveh_banded
    qtq[2] = a * a + b * b + c * c
    # (j-1, j): columns j-1 and j share rows j and j+1
    qtq[1, 1:] = b[:-1] * a[1:] + c[:-1] * b[1:]
    qtq[0, 2:] = c[:-2] * a[2:]
    r = np.zeros((3, m))
    r[2] = (h[:-1] + h[1:]) / 3.0
    r[1, 1:] = h[1:-1] / 6.0
    return a, b, c, qtq, r


def _q_matvec(a, b, c, gamma):
    n = gamma.shape[0] + 2
    out = np.zeros(n)
    out[:-2] += a * gamma
    out[1:-1] += b * gamma
    out[2:] += c * gamma
    return out


def _qt_matvec(a, b, c, y):
    return a * y[:-2] + b * y[1:-1] + c * y[2:]


def _banded_to_dense(band: np.ndarray) -> np.ndarray:
    m = band.shape[1]
    out = np.diag(band[2])
    out += np.diag(band[1, 1:], 1) + np.diag(band[1, 1:], -1)
    if m > 2:
        out += np.diag(band[0, 2:], 2) + np.diag(band[0, 2:], -2)
    return out


@dataclass(frozen=True, eq=False)
class SplineFit:
    """Result of :func:`spline_smooth`. ``gcv_lams``/``gcv_scores`` hold the
    search curve when the penalty was chosen by GCV."""

    smoothed: SampledFunction
    lam: float
    edf: float
    rss: float
    gcv: float
    gcv_lams: Optional[np.ndarray] = field(default=None)
    gcv_scores: Optional[np.ndarray] = field(default=None)


class _SplineSmoother:
    def __init__(self, t: np.ndarray, y: np.ndarray):
        self.t, self.y = t, y
        self.n = t.shape[0]
        self.a, self.b, self.c, self.qtq, self.r = _reinsch_bands(t)
        self.qty = _qt_matvec(self.a, self.b, self.c, y)
        # generalized eigenvalues of Q^T Q v = mu R v are the nonzero eigenvalues
        # of K = Q R^-1 Q^T; the two null directions (lines) are left untouched
        self.mu = np.clip(
            eigh(_banded_to_dense(self.qtq), _banded_to_dense(self.r),
                 eigvals_only=True), 0.0, None)
        self.trace_k = float(self.mu.sum())

    def fit(self, lam: float) -> np.ndarray:
        if lam == 0.0:
            return self.y.copy()
        ab = self.r + lam * self.qtq
        gamma = solveh_banded(ab, self.qty)
        return self.y - lam * _q_matvec(self.a, self.b, self.c, gamma)

    def edf(self, lam: float) -> float:
        return 2.0 + float(np.sum(1.0 / (1.0 + lam * self.mu)))

    def gcv(self, lam: float):
        s = self.fit(lam)
        rss = float(np.sum((self.y - s) ** 2))
        edf = self.edf(lam)
        denom = (1.0 - edf / self.n) ** 2
        score = rss / self.n / denom if denom > 0 else np.inf
        return score, s, rss, edf


def gcv_lambda_grid(f: SampledFunction) -> np.ndarray:
    """Search grid for the spline penalty.

    The normalizer ``n / tr(K)`` makes ``lam * K`` have unit mean eigenvalue
    at the grid centre, which removes dependence on time units and length.
    """
    t = f.grid.points()
    sm = _SplineSmoother(t, np.asarray(f.values, dtype=float))
    return _lambda_grid(sm)


def _lambda_grid(sm: _SplineSmoother) -> np.ndarray:
    scale = sm.n / sm.trace_k
    return scale * np.logspace(*GCV_LOG10_RANGE, GCV_GRID_SIZE)


def spline_smooth(f: SampledFunction, lam: Union[float, str, None] = "gcv",
                  *, full_output: bool = False):
    """Natural cubic smoothing spline evaluated back on the grid of ``f``.

    Minimizes ``sum (y_i - s(t_i))^2 + lam * int s''(t)^2 dt`` with a knot at
    every sample. Time is measured in the native units of ``f.grid``.

    Parameters
    ----------
    f : SampledFunction
        At least 4 samples.
    lam : float, "gcv" or None
        Roughness penalty. ``"gcv"``/``None`` minimizes the generalized
        cross-validation score over :func:`gcv_lambda_grid`.
    full_output : bool
        Return a :class:`SplineFit` instead of the smoothed function.
    """
    if f.n_points < 4:
        raise ValueError("spline smoothing needs at least 4 points")
    sm = _SplineSmoother(f.grid.points(), np.asarray(f.values, dtype=float))
    lams = scores = None
    if lam is None or lam == "gcv":
        lams = _lambda_grid(sm)
        results = [sm.gcv(float(v)) for v in lams]
        scores = np.array([r[0] for r in results])
        best = int(np.argmin(scores))
        chosen = float(lams[best])
        score, s, rss, edf = results[best]
    else:
        chosen = float(lam)
        if chosen < 0:
            raise ValueError("spline penalty must be nonnegative")
        score, s, rss, edf = sm.gcv(chosen)
    out = f.with_values(s)
    if not full_output:
        return out
    return SplineFit(out, chosen, edf, rss, score, lams, scores)


def regrid(f: SampledFunction, n_points: int,
           t0: Optional[float] = None, tT: Optional[float] = None) -> SampledFunction:
    """Linear interpolation onto ``n_points`` equidistant samples.

    The interval defaults to the one ``f`` is observed on; a sub-interval may
    be requested to bring several series onto a common support.
    """
    if int(n_points) != n_points or n_points < 2:
        raise ValueError(f"regrid needs at least 2 points, got {n_points}")
    t0 = f.grid.t0 if t0 is None else t0
    tT = f.grid.tT if tT is None else tT
    grid = UniformGrid(t0, tT, int(n_points))
    if grid == f.grid:
        return f
    if t0 < f.grid.t0 - 1e-9 * f.grid.span or tT > f.grid.tT + 1e-9 * f.grid.span:
        raise ValueError("regrid interval extends beyond the observed interval")
    return SampledFunction(grid, np.interp(grid.points(), f.grid.points(), f.values))


def smooth(f: SampledFunction, spec: SmoothingSpec) -> SampledFunction:
    if spec.method == "none":
        return f
    if spec.method == "kernel":
        return kernel_smooth(f, spec.bandwidth)
    return spline_smooth(f, "gcv" if spec.lam is None else spec.lam)


@dataclass(frozen=True)
class PairScreen:
    index: int
    rho: float
    reason: str = ""


def filter_negative_correlation(pairs: Sequence, threshold: float = 0.0):
    """Split (target, perceiver) pairs by their correlation under no warping.

    Pairs with correlation below ``threshold`` are dropped. A pair whose
    correlation is undefined (a constant sequence) is dropped with reason
    ``"zero-variance"``.

    Returns
    -------
    kept, dropped : list of PairScreen
        Both carry the original index of each pair.
    """
    from .metrics import UndefinedCorrelationError, pearson

    kept, dropped = [], []
    for i, (x, y) in enumerate(pairs):
        try:
            rho = pearson(x, y)
        except UndefinedCorrelationError:
            dropped.append(PairScreen(i, float("nan"), "zero-variance"))
            continue
        if rho < threshold:
            dropped.append(PairScreen(i, rho, "negative-correlation"))
        else:
            kept.append(PairScreen(i, rho))
    return kept, dropped
