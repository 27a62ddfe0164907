import numpy as np
import pytest

from elastic_ea.core import SampledFunction, WarpingFunction, unit_points

# Filled by test_acceptance.py; printed at the end of the session.
ACCEPTANCE = {}


def smooth_function(rng, n_terms=5):
    """Random trigonometric function of t in [0, 1] (vectorized callable)."""
    a = rng.normal(0.0, 1.0, n_terms)
    ph = rng.uniform(0.0, 2 * np.pi, n_terms)
    k = np.arange(1, n_terms + 1)

    def f(t):
        t = np.asarray(t, dtype=float)
        return (a[:, None] * np.sin(np.pi * k[:, None] * t[None] + ph[:, None]) / k[:, None]).sum(0)

    return f


def smooth_warping(rng):
    """Random strictly increasing smooth map of [0, 1] onto itself."""
    c = rng.uniform(-1.5, 1.5)
    b = rng.uniform(-0.03, 0.03)

    def g(t):
        t = np.asarray(t, dtype=float)
        base = np.expm1(c * t) / np.expm1(c) if abs(c) > 1e-6 else t
        return base + b * np.sin(np.pi * t) ** 2 * np.sin(2 * np.pi * t) / 2

    return g


def sample(f, n, t0=0.0, tT=1.0):
    return SampledFunction.from_values(f(unit_points(n)), t0, tT)


def sample_warping(g, n):
    return WarpingFunction.repaired(g(unit_points(n)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        name, ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(
            f"criterion {num:2d} {name}: {'PASS' if ok else 'FAIL'} ({detail})")
