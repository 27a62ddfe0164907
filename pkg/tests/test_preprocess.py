import numpy as np
import pytest
from scipy.interpolate import make_smoothing_spline
from scipy.linalg import eigh

from elastic_ea.core import SampledFunction, UniformGrid
from elastic_ea.preprocess import (GCV_GRID_SIZE, SmoothingSpec, filter_negative_correlation,
                                   kernel_smooth, regrid, smooth, spline_smooth)


def _noisy_sine(rng, n=120, span=10.0):
    t = np.linspace(0, span, n)
    return SampledFunction.from_values(np.sin(t) + rng.normal(0, 0.3, n), 0.0, span)


def test_kernel_constant_unchanged():
    f = SampledFunction.from_values(np.full(50, 3.5), 0, 49)
    for h in (0.5, 10.0, 1000.0):
        np.testing.assert_allclose(kernel_smooth(f, h).values, 3.5, rtol=0, atol=1e-13)


def test_kernel_impulse_matches_direct_weights():
    n = 101
    v = np.zeros(n)
    v[50] = 1.0
    f = SampledFunction.from_values(v, 0.0, 100.0)
    out = kernel_smooth(f, 10.0).values
    expected = np.empty(n)
    for i in range(n):
        w = [np.exp(-0.5 * ((i - j) / 10.0) ** 2) for j in range(n)]
        expected[i] = w[50] / sum(w)
    np.testing.assert_allclose(out, expected, rtol=1e-12, atol=1e-15)


def test_kernel_tiny_bandwidth_is_identity(rng):
    f = SampledFunction.from_values(rng.normal(size=80), 0.0, 79.0)
    out = kernel_smooth(f, f.grid.spacing / 100)
    assert np.max(np.abs(out.values - f.values)) < 1e-9


def test_kernel_bandwidth_in_native_units(rng):
    v = rng.normal(size=60)
    a = kernel_smooth(SampledFunction.from_values(v, 0.0, 59.0), 5.0)
    b = kernel_smooth(SampledFunction.from_values(v, 0.0, 118.0), 10.0)
    np.testing.assert_allclose(a.values, b.values, rtol=1e-13)


def test_kernel_rejects_bad_bandwidth():
    f = SampledFunction.from_values(np.zeros(5))
    for h in (0.0, -1.0):
        with pytest.raises(ValueError):
            kernel_smooth(f, h)


def test_smoothers_are_linear(rng):
    f = SampledFunction.from_values(rng.normal(size=70), 0, 7)
    g = f.with_values(rng.normal(size=70))
    comb = f.with_values(2.0 * f.values - 0.5 * g.values)
    for op in (lambda u: kernel_smooth(u, 0.4), lambda u: spline_smooth(u, 0.05)):
        lhs = op(comb).values
        rhs = 2.0 * op(f).values - 0.5 * op(g).values
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_spline_preserves_constants():
    f = SampledFunction.from_values(np.full(40, -2.0), 0, 4)
    np.testing.assert_allclose(spline_smooth(f, 3.0).values, -2.0, atol=1e-12)


def test_spline_zero_penalty_interpolates(rng):
    f = _noisy_sine(rng)
    assert np.array_equal(spline_smooth(f, 0.0).values, f.values)


def _penalty_scale(t):
    """``1 / mu_min``: inverse of the smallest nonzero eigenvalue of the
    smoother's penalty ``Q R^-1 Q'``, built densely from its definition."""
    n, h = len(t), np.diff(t)
    Q = np.zeros((n, n - 2))
    R = np.zeros((n - 2, n - 2))
    for j in range(n - 2):
        Q[j, j], Q[j + 1, j], Q[j + 2, j] = 1 / h[j], -1 / h[j] - 1 / h[j + 1], 1 / h[j + 1]
        R[j, j] = (h[j] + h[j + 1]) / 3
        if j + 1 < n - 2:
            R[j, j + 1] = R[j + 1, j] = h[j + 1] / 6
    return 1.0 / eigh(Q.T @ Q, R, eigvals_only=True)[0]


def test_spline_huge_penalty_gives_regression_line(rng):
    f = _noisy_sine(rng)
    scale = _penalty_scale(f.grid.points())
    out = spline_smooth(f, 1e12 * scale).values
    t = f.grid.points()
    coef = np.polyfit(t, f.values, 1)
    assert np.max(np.abs(out - np.polyval(coef, t))) < 1e-6


def test_spline_matches_independent_solver(rng):
    f = _noisy_sine(rng)
    t = f.grid.points()
    for lam in (1e-3, 0.1, 10.0):
        ref = make_smoothing_spline(t, f.values, lam=lam)(t)
        np.testing.assert_allclose(spline_smooth(f, lam).values, ref, atol=1e-8)


def test_gcv_choice_minimizes_grid_and_rss_between_extremes(rng):
    f = _noisy_sine(rng)
    fit = spline_smooth(f, "gcv", full_output=True)
    assert len(fit.gcv_lams) == GCV_GRID_SIZE
    assert np.all(fit.gcv <= fit.gcv_scores)
    rss_inf = np.sum((f.values - np.polyval(np.polyfit(f.grid.points(), f.values, 1),
                                            f.grid.points())) ** 2)
    assert 0.0 < fit.rss < rss_inf
    # GCV curve re-evaluated by direct fits agrees with the reported one
    t = f.grid.points()
    for lam, score in list(zip(fit.gcv_lams, fit.gcv_scores))[::15]:
        s = make_smoothing_spline(t, f.values, lam=lam)(t)
        # the edf of the reference is not exposed; compare residuals instead
        ours = spline_smooth(f, lam, full_output=True)
        np.testing.assert_allclose(ours.rss, np.sum((f.values - s) ** 2), rtol=1e-6, atol=1e-10)
        np.testing.assert_allclose(ours.gcv, score, rtol=1e-12)


def test_spline_edf_matches_dense_trace(rng):
    f = _noisy_sine(rng, n=40)
    n = f.n_points
    lam = 0.3
    # column j of the smoother matrix is the fit to the j-th unit vector
    S = np.column_stack([spline_smooth(f.with_values(np.eye(n)[j]), lam).values for j in range(n)])
    assert spline_smooth(f, lam, full_output=True).edf == pytest.approx(np.trace(S), rel=1e-8)


def test_spline_needs_four_points():
    with pytest.raises(ValueError):
        spline_smooth(SampledFunction.from_values([0.0, 1.0, 0.0]), 1.0)


def test_regrid_examples():
    f = SampledFunction.from_values(np.arange(10.0) ** 2, 0, 9)
    assert regrid(f, 10) is f
    line = SampledFunction.from_values(3.0 * np.linspace(0, 1, 7) - 1.0)
    for n in (2, 13, 300):
        out = regrid(line, n)
        np.testing.assert_allclose(out.values, 3.0 * np.linspace(0, 1, n) - 1.0, atol=1e-14)
    with pytest.raises(ValueError):
        regrid(f, 1)


def test_regrid_epoch_ratings(rng):
    # 108 s averaged in 2 s epochs: 55 samples on [0, 108]
    raw = SampledFunction(UniformGrid(0.0, 108.0, 55), rng.normal(size=55))
    out = regrid(raw, 300)
    assert out.grid == UniformGrid(0.0, 108.0, 300)
    t_new = np.linspace(0.0, 108.0, 300)
    t_old = np.arange(55) * 2.0
    for i in range(0, 300, 7):
        j = min(int(t_new[i] // 2.0), 53)
        w = (t_new[i] - t_old[j]) / 2.0
        assert out.values[i] == pytest.approx((1 - w) * raw.values[j] + w * raw.values[j + 1],
                                              abs=1e-12)


def test_smoothing_spec_parse():
    assert SmoothingSpec.parse("none").method == "none"
    assert SmoothingSpec.parse("kernel:2.5").bandwidth == 2.5
    assert SmoothingSpec.parse("spline").lam is None
    assert SmoothingSpec.parse("spline:0.1").lam == 0.1
    for bad in ("kernel:0", "kernel:-1", "spline:-2", "lowess"):
        with pytest.raises(ValueError):
            SmoothingSpec.parse(bad)
    f = SampledFunction.from_values(np.arange(5.0))
    assert smooth(f, SmoothingSpec()) is f


def test_filter_examples(rng):
    x = SampledFunction.from_values(rng.normal(size=30).cumsum())
    kept, dropped = filter_negative_correlation([(x, x), (x, x.with_values(-x.values))])
    assert [k.index for k in kept] == [0] and [d.index for d in dropped] == [1]
    assert dropped[0].reason == "negative-correlation"
    flat = x.with_values(np.ones(30))
    _, dropped = filter_negative_correlation([(x, flat)])
    assert dropped[0].reason == "zero-variance"


def test_filter_batch_drops_exactly_the_flipped(rng):
    pairs, flipped = [], {17, 63}
    for i in range(100):
        x = SampledFunction.from_values(rng.normal(size=100).cumsum())
        y = x.with_values(x.values + rng.normal(0, 0.3 * x.values.std(), 100))
        if i in flipped:
            y = y.with_values(-y.values)
        pairs.append((x, y))
    kept, dropped = filter_negative_correlation(pairs)
    assert {d.index for d in dropped} == flipped
    assert len(kept) == 98


def test_filter_threshold():
    x = SampledFunction.from_values([0.0, 1.0, 2.0, 3.0])
    y = x.with_values([0.0, 2.0, 1.0, 3.0])  # rho = 0.8
    assert len(filter_negative_correlation([(x, y)], 0.9)[1]) == 1
    assert len(filter_negative_correlation([(x, y)], 0.5)[0]) == 1
