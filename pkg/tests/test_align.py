import numpy as np
import pytest

from conftest import smooth_function
from oracles import brute_force_cost
from elastic_ea.align import (AlignmentMethod, align, align_fixed_delay, align_identity,
                              align_srvf, fixed_delay_warping, sup_deviation)
from elastic_ea.core import (GridMismatchError, NormalizedBound, SampledFunction,
                             WarpingFunction, apply_warping, identity_warping, unit_points)
from elastic_ea.srvf import srvf_l2_distance, to_srvf


def _pair(rng, n=101, span=1.0, shift=0.05):
    f = smooth_function(rng)
    t = unit_points(n)
    x = SampledFunction.from_values(f(t), 0.0, span)
    y = SampledFunction.from_values(f(np.clip(t + shift * np.sin(np.pi * t), 0, 1))
                                    + rng.normal(0, 0.02, n), 0.0, span)
    return x, y


def test_identity_aligner(rng):
    x, y = _pair(rng)
    r = align_identity(x, x)
    assert r.cost == 0.0 and r.phase_distance == 0.0
    r = align_identity(x, y)
    assert r.warping.is_identity() and np.array_equal(r.aligned.values, y.values)
    assert r.cost == pytest.approx(srvf_l2_distance(to_srvf(x), to_srvf(y)) ** 2, abs=1e-12)
    with pytest.raises(GridMismatchError):
        align_identity(x, SampledFunction.from_values(np.zeros(7)))


def test_fixed_delay_warping_shape():
    g = fixed_delay_warping(11, 3)
    assert g.values[0] == 0.0 and g.values[-1] == 1.0
    np.testing.assert_allclose(g.values[1:8], (np.arange(1, 8) + 3) / 10)
    assert np.all(g.values[7:] == 1.0)


def _bump(t):
    """Smooth, with zero derivative outside [0.1, 0.9]."""
    z = np.clip((t - 0.1) / 0.8, 0, 1)
    return np.sin(np.pi * z) ** 2 + 0.5 * np.sin(2 * np.pi * z) ** 2


def test_fixed_delay_examples(rng):
    n = 201
    t = unit_points(n)
    x = SampledFunction.from_values(_bump(t), 0.0, 200.0)
    bound = NormalizedBound(20.0, 200.0)
    assert align_fixed_delay(x, x, bound).delay == 0.0
    # perceiver lags the target by 5 steps: y(t) = x(t - delta0)
    y = SampledFunction.from_values(_bump(t - 5 / 200), 0.0, 200.0)
    assert align_fixed_delay(x, y, bound).delay == 5.0
    tiny = NormalizedBound(0.5, 200.0)
    assert align_fixed_delay(x, y, tiny).delay == 0.0


def test_fixed_delay_matches_direct_search(rng):
    for _ in range(5):
        x, y = _pair(rng, n=120, span=119.0, shift=0.1)
        r = align_fixed_delay(x, y, NormalizedBound(15.0, 119.0))
        qx, qy = to_srvf(x).values, to_srvf(y).values
        costs = []
        for d in range(16):
            g = np.minimum(np.arange(120) + d, 119) / 119
            g[0] = 0.0
            qg = np.interp(g, unit_points(120), qy) * np.sqrt(np.maximum(np.gradient(g, unit_points(120)), 0))
            e = (qx - qg) ** 2
            costs.append((e[1:] + e[:-1]).sum() / 2 / 119)
        assert r.delay == float(np.argmin(costs))
        assert r.cost == pytest.approx(min(costs), rel=1e-12)


def test_srvf_self_alignment_is_identity(rng):
    x, _ = _pair(rng)
    for bound in (None, NormalizedBound(0.1)):
        r = align_srvf(x, x, bound)
        assert r.cost == 0.0 and r.warping.is_identity()


def test_srvf_tiny_bound_gives_identity(rng):
    x, y = _pair(rng)
    r = align_srvf(x, y, NormalizedBound(0.5 / (x.n_points - 1)))
    assert r.warping.is_identity()
    assert np.array_equal(r.aligned.values, y.values)


def test_srvf_inactive_bound_matches_unbounded(rng):
    x, y = _pair(rng)
    u = align_srvf(x, y, None)
    p = align_srvf(x, y, NormalizedBound(u.sup_deviation))
    assert np.array_equal(u.nodes, p.nodes)
    assert np.array_equal(u.warping.values, p.warping.values)


@pytest.mark.parametrize("n", [4, 6, 7])
def test_exhaustive_matches_brute_force(rng, n):
    for _ in range(15):
        x = SampledFunction.from_values(rng.normal(size=n))
        y = SampledFunction.from_values(rng.normal(size=n))
        b = NormalizedBound(rng.uniform(0.01, 1.0))
        r = align_srvf(x, y, b, window=None)
        oracle, _ = brute_force_cost(to_srvf(x).values, to_srvf(y).values, b.lattice_band(n - 1))
        assert r.cost == pytest.approx(oracle, abs=1e-10)


def test_cost_is_path_cost_of_returned_warping(rng):
    x, y = _pair(rng, n=8, shift=0.2)
    r = align_srvf(x, y, None, window=None)
    from oracles import segment_cost
    qx, qy = to_srvf(x).values, to_srvf(y).values
    c = sum(segment_cost(qx, qy, *a, *b) for a, b in zip(r.nodes[:-1], r.nodes[1:]))
    assert c == pytest.approx(r.cost, abs=1e-12)


def test_large_window_equals_exhaustive(rng):
    x, y = _pair(rng, n=21, shift=0.1)
    a = align_srvf(x, y, NormalizedBound(0.3), window=None)
    b = align_srvf(x, y, NormalizedBound(0.3), window=20)
    assert np.array_equal(a.nodes, b.nodes)


def test_exhaustive_limited_to_small_grids(rng):
    x, y = _pair(rng, n=62)
    with pytest.raises(ValueError):
        align_srvf(x, y, None, window=None)


def test_cost_monotone_in_bound(rng):
    for _ in range(5):
        x, y = _pair(rng, shift=0.15)
        costs = [align_srvf(x, y, NormalizedBound(nu)).cost for nu in (0.01, 0.03, 0.08, 0.2)]
        unb = align_srvf(x, y, None).cost
        ident = align_identity(x, y).cost
        assert all(a >= b - 1e-15 for a, b in zip(costs, costs[1:]))
        assert unb <= costs[-1] + 1e-15
        # the identity path is feasible for every bound; its DP cost is the
        # trapezoid distance without warping
        assert costs[0] <= ident + 1e-12


def test_bound_respected_in_native_units(rng):
    x, y = _pair(rng, n=151, span=108.0, shift=0.15)
    for nu in (6.0, 8.0, 10.0):
        r = align_srvf(x, y, NormalizedBound(nu, 108.0))
        assert r.sup_deviation <= nu + x.grid.spacing


def test_bound_span_must_match(rng):
    x, y = _pair(rng, span=108.0)
    with pytest.raises(ValueError):
        align_srvf(x, y, NormalizedBound(8.0, 100.0))


def test_determinism(rng):
    x, y = _pair(rng, shift=0.2)
    a = align_srvf(x, y, NormalizedBound(0.1))
    b = align_srvf(x, y, NormalizedBound(0.1))
    assert np.array_equal(a.warping.values, b.warping.values) and a.cost == b.cost


def test_result_invariants(rng):
    x, y = _pair(rng, shift=0.2)
    for m in (AlignmentMethod.identity(), AlignmentMethod.fixed_delay(NormalizedBound(0.1)),
              AlignmentMethod.srvf(NormalizedBound(0.1)), AlignmentMethod.srvf(None)):
        r = align(x, y, m)
        g = r.warping.values
        assert g[0] == 0.0 and g[-1] == 1.0 and np.all(np.diff(g) >= 0)
        assert r.cost >= 0 and 0 <= r.phase_distance <= np.pi / 2
        assert np.array_equal(r.aligned.values, apply_warping(y, r.warping).values)


def test_sup_deviation_examples():
    assert sup_deviation(identity_warping(11)) == 0.0
    v = unit_points(11).copy()
    v[4:7] += 0.1
    assert sup_deviation(WarpingFunction.from_values(v), 50.0) == pytest.approx(5.0)


def test_sup_deviation_equals_dense_max(rng):
    v = np.sort(rng.uniform(size=20))
    g = WarpingFunction.repaired(np.concatenate(([0.0], v, [1.0])))
    t = unit_points(g.n_points)
    dense = np.linspace(0, 1, (g.n_points - 1) * 1000 + 1)
    assert sup_deviation(g) == pytest.approx(np.max(np.abs(np.interp(dense, t, g.values) - dense)),
                                             abs=1e-12)


def test_method_validation():
    with pytest.raises(ValueError):
        AlignmentMethod("dtw")
    with pytest.raises(ValueError):
        AlignmentMethod("fixed_delay", None)
    with pytest.raises(ValueError):
        AlignmentMethod.srvf(None, window=0)
    assert AlignmentMethod.srvf(None).label == "unpenalized_srvf"
    assert AlignmentMethod.srvf(NormalizedBound(0.1)).describe()["quadrature"] == "trapezoid"
