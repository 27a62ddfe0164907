"""Random intercept and slope model for one perceiver across stimuli.

For stimulus ``j`` with target ``x_j`` and aligned response ``y_j``::

    y_j = beta0 + beta1 x_j + b0j + b1j x_j + e_j,
    b0j ~ N(0, s2_b0), b1j ~ N(0, s2_b1), e_j ~ N(0, s2 I)

with independent random effects. The REML criterion only needs the 2x2
sufficient statistics ``Z'Z``, ``Z'y`` and ``y'y`` of each stimulus, where
``Z = [1, x_j]``; every evaluation is O(J) after an O(N) setup.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from .core import SampledFunction, WarpingFunction, integrate
from .srvf import phase_distance

__all__ = [
    "MixedModelData",
    "MixedModelFit",
    "reml_criterion",
    "fit_reml",
    "fitted_responses",
    "fit_metrics",
]

FLOOR_REL = 1e-10
BOUNDARY_REL = 1e-6
N_RESTARTS = 3
RESTART_JITTER = 0.5
REL_TOL = 1e-8
_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True, eq=False)
class MixedModelData:
    """Per-stimulus targets, aligned responses and the warpings that produced them.

    ``warpings`` may be omitted (treated as identity warpings by the metrics).
    """

    targets: Tuple[SampledFunction, ...]
    responses: Tuple[SampledFunction, ...]
    warpings: Optional[Tuple[WarpingFunction, ...]] = None

    def __post_init__(self):
        xs, ys = tuple(self.targets), tuple(self.responses)
        object.__setattr__(self, "targets", xs)
        object.__setattr__(self, "responses", ys)
        if len(xs) != len(ys):
            raise ValueError("need one response per target")
        if len(xs) < 2:
            raise ValueError("the mixed model needs at least 2 stimuli")
        for j, (x, y) in enumerate(zip(xs, ys)):
            if x.n_points != y.n_points:
                raise ValueError(f"stimulus {j}: target and response lengths differ")
            if x.n_points < 3:
                raise ValueError(f"stimulus {j}: need at least 3 time points")
            if np.ptp(x.values) == 0.0:
                raise ValueError(f"stimulus {j}: target is constant")
        if self.warpings is not None:
            gs = tuple(self.warpings)
            if len(gs) != len(xs):
                raise ValueError("need one warping per stimulus")
            object.__setattr__(self, "warpings", gs)

    @classmethod
    def from_arrays(cls, xs: Sequence[np.ndarray], ys: Sequence[np.ndarray]) -> "MixedModelData":
        return cls(tuple(SampledFunction.from_values(x) for x in xs),
                   tuple(SampledFunction.from_values(y) for y in ys))

    @property
    def n_stimuli(self) -> int:
        return len(self.targets)


class _Stats:
    """Sufficient statistics, stacked over stimuli."""

    def __init__(self, data: MixedModelData):
        xs = [np.asarray(x.values, dtype=float) for x in data.targets]
        ys = [np.asarray(y.values, dtype=float) for y in data.responses]
        self.n = np.array([len(x) for x in xs], dtype=float)
        self.S = np.stack([[[len(x), x.sum()], [x.sum(), x @ x]] for x in xs])
        self.zy = np.stack([[y.sum(), x @ y] for x, y in zip(xs, ys)])
        self.yy = np.array([y @ y for y in ys])
        self.N = float(self.n.sum())
        self.p = 2
        yall = np.concatenate(ys)
        self.var_y = float(np.var(yall)) if np.var(yall) > 0 else 1.0

    def solve(self, theta):
        """GLS pieces at ``theta = (s2, s2_b0, s2_b1)``."""
        s2, g0, g1 = theta
        G = np.diag([g0, g1])
        M = s2 * np.eye(2) + self.S @ G          # (J, 2, 2)
        C = G @ np.linalg.inv(M)                 # G (s2 I + S G)^-1
        SC = self.S @ C
        A = (self.S - SC @ self.S) / s2          # X'V^-1X per stimulus
        b = (self.zy - np.einsum("jab,jb->ja", SC, self.zy)) / s2
        q = (self.yy - np.einsum("ja,jab,jb->j", self.zy, C, self.zy)) / s2
        logdet_v = self.n * math.log(s2) + np.log(np.linalg.det(M)) - 2 * math.log(s2)
        return A, b, q, logdet_v, C


def _criterion(stats: _Stats, theta) -> Tuple[float, np.ndarray]:
    A, b, q, logdet_v, _ = stats.solve(theta)
    At, bt = A.sum(axis=0), b.sum(axis=0)
    beta = np.linalg.solve(At, bt)
    sign, logdet_a = np.linalg.slogdet(At)
    if sign <= 0:
        return math.inf, beta
    quad = q.sum() - beta @ bt
    m2l = logdet_v.sum() + logdet_a + quad + (stats.N - stats.p) * _LOG_2PI
    return float(m2l), beta


def reml_criterion(data: MixedModelData, theta: Sequence[float]) -> float:
    """``-2`` times the restricted log-likelihood at ``(s2, s2_b0, s2_b1)``."""
    if theta[0] <= 0 or theta[1] < 0 or theta[2] < 0:
        raise ValueError("variances must be positive (noise) or nonnegative (random effects)")
    return _criterion(_Stats(data), tuple(float(v) for v in theta))[0]


@dataclass
class MixedModelFit:
    beta0: float
    beta1: float
    sigma2: float
    sigma2_b0: float
    sigma2_b1: float
    blups: np.ndarray
    reml_loglik: float
    converged: bool
    boundary: dict = field(default_factory=dict)
    n_evals: int = 0
    restarts: int = 0

    @property
    def theta(self) -> Tuple[float, float, float]:
        return self.sigma2, self.sigma2_b0, self.sigma2_b1

    def as_dict(self) -> dict:
        return {
            "beta0": self.beta0,
            "beta1": self.beta1,
            "sigma2": self.sigma2,
            "sigma2_b0": self.sigma2_b0,
            "sigma2_b1": self.sigma2_b1,
            "blups": [{"b0": float(b0), "b1": float(b1)} for b0, b1 in self.blups],
            "reml_loglik": self.reml_loglik,
            "converged": self.converged,
            "boundary": dict(self.boundary),
            "n_evals": self.n_evals,
            "restarts": self.restarts,
        }


def _moment_start(data: MixedModelData, floor: float) -> np.ndarray:
    """Per-stimulus OLS lines: spread of their coefficients and mean residual variance."""
    coefs, resid = [], []
    for x, y in zip(data.targets, data.responses):
        X = np.column_stack([np.ones(x.n_points), x.values])
        c, *_ = np.linalg.lstsq(X, y.values, rcond=None)
        r = y.values - X @ c
        coefs.append(c)
        resid.append(r @ r / max(x.n_points - 2, 1))
    coefs = np.array(coefs)
    s2 = max(float(np.mean(resid)), floor * 10)
    g0 = max(float(np.var(coefs[:, 0], ddof=1)), floor * 10)
    g1 = max(float(np.var(coefs[:, 1], ddof=1)), floor * 10)
    return np.log([s2, g0, g1])


def fit_reml(data: MixedModelData, seed: int = 0, max_iter: int = 4000) -> MixedModelFit:
    """REML estimates, GLS fixed effects and BLUPs.

    Nelder-Mead runs on log-variances, box-bounded below at
    ``1e-10 * var(y)``. After the first run, up to three restarts from
    jittered copies of the best point are tried; the fit counts as converged
    once a restart fails to improve the criterion by more than ``1e-8``
    relative (and the simplex itself reported success).
    """
    stats = _Stats(data)
    floor = FLOOR_REL * stats.var_y
    lo = math.log(floor)
    hi = math.log(1e8 * stats.var_y)
    bounds = [(lo, hi)] * 3
    n_evals = 0

    def objective(z):
        nonlocal n_evals
        n_evals += 1
        return _criterion(stats, tuple(np.exp(z)))[0]

    def run(z0):
        z0 = np.clip(z0, lo, hi)
        f0 = objective(z0)
        opts = {"xatol": 1e-10, "fatol": REL_TOL * 1e-4 * max(1.0, abs(f0)),
                "maxiter": max_iter, "maxfev": 2 * max_iter}
        return minimize(objective, z0, method="Nelder-Mead", bounds=bounds, options=opts)

    rng = np.random.default_rng(seed)
    best = run(_moment_start(data, floor))
    stable = False
    restarts = 0
    for _ in range(N_RESTARTS):
        restarts += 1
        cand = run(best.x + rng.normal(0.0, RESTART_JITTER, 3))
        gain = (best.fun - cand.fun) / max(1.0, abs(best.fun))
        if cand.fun < best.fun:
            best = cand
        if gain < REL_TOL:
            stable = True
            break
    theta = tuple(float(v) for v in np.exp(best.x))
    value, beta = _criterion(stats, theta)
    blups = _blups(stats, theta, beta)
    boundary = {
        "sigma2_b0": theta[1] <= floor * (1 + BOUNDARY_REL) or theta[1] < BOUNDARY_REL * stats.var_y,
        "sigma2_b1": theta[2] <= floor * (1 + BOUNDARY_REL) or theta[2] < BOUNDARY_REL * stats.var_y,
    }
    return MixedModelFit(
        beta0=float(beta[0]), beta1=float(beta[1]),
        sigma2=theta[0], sigma2_b0=theta[1], sigma2_b1=theta[2],
        blups=blups, reml_loglik=-0.5 * value,
        converged=bool(stable and best.success and np.isfinite(value)),
        boundary=boundary, n_evals=n_evals, restarts=restarts,
    )


def _blups(stats: _Stats, theta, beta) -> np.ndarray:
    """``E[b_j | y] = G Z'V^-1 (y - X beta)`` for every stimulus."""
    s2, g0, g1 = theta
    G = np.diag([g0, g1])
    _, _, _, _, C = stats.solve(theta)
    zr = stats.zy - stats.S @ beta
    vr = (zr - np.einsum("jab,jbc,jc->ja", stats.S, C, zr)) / s2
    return vr @ G.T


def fitted_responses(data: MixedModelData, fit: MixedModelFit) -> List[np.ndarray]:
    """``beta0 + beta1 x_j + b0j + b1j x_j`` per stimulus."""
    return [fit.beta0 + b0 + (fit.beta1 + b1) * np.asarray(x.values)
            for x, (b0, b1) in zip(data.targets, fit.blups)]


def fit_metrics(data: MixedModelData, fit: MixedModelFit) -> Tuple[float, float]:
    """Mean phase distance of the warpings and the summed vertical distance.

    The vertical distance is ``sum_j ||y_j - yhat_j||^2`` with the trapezoid
    rule on the normalized domain.
    """
    if data.warpings is None:
        mean_phase = 0.0
    else:
        mean_phase = float(np.mean([phase_distance(g) for g in data.warpings]))
    vertical = 0.0
    for y, yhat in zip(data.responses, fitted_responses(data, fit)):
        vertical += integrate((np.asarray(y.values) - yhat) ** 2, 1.0 / (y.n_points - 1))
    return mean_phase, float(vertical)
