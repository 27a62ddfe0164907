import numpy as np
import pytest

from lmm_data import dense_criterion, eq7_data
from elastic_ea.core import SampledFunction, WarpingFunction, identity_warping, integrate, unit_points
from elastic_ea.lmm import MixedModelData, fit_metrics, fit_reml, fitted_responses, reml_criterion


def test_criterion_matches_dense_oracle(rng):
    data, xs, ys = eq7_data(rng, J=6, T=25)
    for _ in range(10):
        theta = tuple(np.exp(rng.uniform(-4, 1, 3)))
        assert reml_criterion(data, theta) == pytest.approx(dense_criterion(xs, ys, theta)[0],
                                                            rel=1e-11)


def test_criterion_rejects_bad_variances(rng):
    data, _, _ = eq7_data(rng, J=3, T=10)
    with pytest.raises(ValueError):
        reml_criterion(data, (0.0, 1.0, 1.0))


def test_blups_match_dense_formula(rng):
    data, xs, ys = eq7_data(rng, J=5, T=30)
    fit = fit_reml(data)
    _, beta, parts = dense_criterion(xs, ys, fit.theta)
    np.testing.assert_allclose([fit.beta0, fit.beta1], beta, rtol=1e-9)
    G = np.diag([fit.sigma2_b0, fit.sigma2_b1])
    for (Vi, Z, y), b in zip(parts, fit.blups):
        np.testing.assert_allclose(b, G @ Z.T @ Vi @ (y - Z @ beta), rtol=1e-8, atol=1e-12)


def test_noiseless_data_gives_ols_line_and_floor_variances(rng):
    xs = [np.cumsum(rng.normal(size=50)) for _ in range(4)]
    ys = [1.5 - 0.7 * x for x in xs]
    fit = fit_reml(MixedModelData.from_arrays(xs, ys))
    X, Y = np.concatenate(xs), np.concatenate(ys)
    ols = np.polyfit(X, Y, 1)
    assert fit.beta1 == pytest.approx(ols[0], abs=1e-8)
    assert fit.beta0 == pytest.approx(ols[1], abs=1e-8)
    floor = 1e-10 * np.var(Y)
    assert fit.sigma2_b0 <= floor * (1 + 1e-6) and fit.sigma2_b1 <= floor * (1 + 1e-6)
    assert fit.boundary["sigma2_b0"] and fit.boundary["sigma2_b1"]


def test_estimate_beats_random_probes(rng):
    data, _, _ = eq7_data(rng, J=8, T=40)
    fit = fit_reml(data)
    best = reml_criterion(data, fit.theta)
    assert fit.reml_loglik == pytest.approx(-0.5 * best)
    for _ in range(100):
        probe = tuple(np.exp(rng.uniform(np.log(1e-4), np.log(5.0), 3)))
        assert best <= reml_criterion(data, probe)
    assert fit.converged


def test_scale_equivariance(rng):
    data, xs, ys = eq7_data(rng, J=10, T=40)
    c = 3.0
    scaled = MixedModelData.from_arrays(xs, [c * y for y in ys])
    a, b = fit_reml(data), fit_reml(scaled)
    assert b.beta0 == pytest.approx(c * a.beta0, rel=1e-6)
    assert b.beta1 == pytest.approx(c * a.beta1, rel=1e-6)
    for va, vb in zip(a.theta, b.theta):
        assert vb == pytest.approx(c * c * va, rel=1e-6)


def test_blups_shrink_without_heterogeneity(rng):
    data, _, _ = eq7_data(rng, J=10, T=100, sigma_b0=0.0, sigma_b1=0.0, sigma=0.5)
    fit = fit_reml(data)
    het, _, _ = eq7_data(rng, J=10, T=100, sigma=0.5)
    fit_het = fit_reml(het)
    assert np.max(np.abs(fit.blups)) < 0.1 * np.max(np.abs(fit_het.blups))
    assert np.max(np.abs(fit.blups)) < 0.05


def test_fit_metrics(rng):
    data, xs, ys = eq7_data(rng, J=4, T=30)
    fit = fit_reml(data)
    mean_phase, vertical = fit_metrics(data, fit)
    assert mean_phase == 0.0
    oracle = 0.0
    for x, y, (b0, b1) in zip(xs, ys, fit.blups):
        r = y - (fit.beta0 + b0 + (fit.beta1 + b1) * x)
        oracle += sum((r[i] ** 2 + r[i + 1] ** 2) / 2 for i in range(len(r) - 1)) / (len(r) - 1)
    assert vertical == pytest.approx(oracle, abs=1e-10)
    t = unit_points(30)
    warped = MixedModelData(data.targets, data.responses,
                            (identity_warping(30),) * 3 + (WarpingFunction.from_values(t ** 2),))
    mp, _ = fit_metrics(warped, fit)
    assert mp == pytest.approx(np.arccos(integrate(np.sqrt(np.gradient(t ** 2, t)), t[1])) / 4)


def test_perfect_fit_has_zero_vertical(rng):
    xs = [np.cumsum(rng.normal(size=40)) for _ in range(3)]
    data = MixedModelData.from_arrays(xs, [2.0 + 0.5 * x for x in xs])
    fit = fit_reml(data)
    assert fit_metrics(data, fit)[1] < 1e-12
    assert all(np.allclose(f, 2.0 + 0.5 * x) for f, x in zip(fitted_responses(data, fit), xs))


def test_data_validation():
    x = SampledFunction.from_values(np.arange(5.0))
    with pytest.raises(ValueError):
        MixedModelData((x,), (x,))
    flat = x.with_values(np.ones(5))
    with pytest.raises(ValueError):
        MixedModelData((x, flat), (x, x))
    short = SampledFunction.from_values([0.0, 1.0])
    with pytest.raises(ValueError):
        MixedModelData((short, short), (short, short))


def test_fit_serializes(rng):
    data, _, _ = eq7_data(rng, J=3, T=20)
    d = fit_reml(data).as_dict()
    assert set(d) >= {"beta0", "beta1", "sigma2", "sigma2_b0", "sigma2_b1", "blups",
                      "reml_loglik", "converged", "boundary"}
    assert len(d["blups"]) == 3
