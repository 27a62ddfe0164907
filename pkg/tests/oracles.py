"""Slow, independent reference implementations used as test oracles."""
import itertools

import numpy as np


def segment_cost(qx, qy, k0, l0, k1, l1):
    """Trapezoid cost of the straight lattice piece (k0,l0)->(k1,l1)."""
    T = len(qx) - 1
    s = (l1 - l0) / (k1 - k0)
    m = np.arange(k0, k1 + 1)
    u = l0 + s * (m - k0)
    d = qx[m] - np.interp(u, np.arange(T + 1), qy) * np.sqrt(s)
    w = np.ones(len(m))
    w[0] = w[-1] = 0.5
    return float(np.sum(w * d * d)) / T


def bounded_paths(T, band):
    """Every chain (0,0) < ... < (T,T), strictly increasing in both indices,
    whose nodes satisfy |k - l| <= band."""
    for r in range(0, T):
        for ks in itertools.combinations(range(1, T), r):
            for ls in itertools.combinations(range(1, T), r):
                nodes = list(zip(ks, ls))
                if all(abs(k - l) <= band for k, l in nodes):
                    yield [(0, 0)] + nodes + [(T, T)]


def brute_force_cost(qx, qy, band):
    T = len(qx) - 1
    table = {}

    def cost(a, b):
        key = (a, b)
        if key not in table:
            table[key] = segment_cost(qx, qy, a[0], a[1], b[0], b[1])
        return table[key]

    best, best_path = np.inf, None
    for path in bounded_paths(T, band):
        c = sum(cost(a, b) for a, b in zip(path[:-1], path[1:]))
        if c < best:
            best, best_path = c, path
    return best, best_path
