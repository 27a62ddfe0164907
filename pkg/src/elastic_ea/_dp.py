"""Compiled kernels for the sup-constrained SRVF dynamic program.

Lattice node ``(k, l)`` means ``gamma(t_k) = t_l`` with ``t_m = m / T``.
"""
import numpy as np
from numba import njit

TIE_RTOL = 1e-12


@njit(cache=True)
def segment_cost(qx, qy, k0, l0, k1, l1):
    """Trapezoid approximation of the cost of the straight piece (k0,l0)->(k1,l1)."""
    T = qx.shape[0] - 1
    dk = k1 - k0
    dl = l1 - l0
    rs = np.sqrt(dl / dk)
    total = 0.0
    for m in range(k0, k1 + 1):
        # integer numerator keeps lattice hits exact
        u = l0 + (dl * (m - k0)) / dk
        i = int(u)
        if i >= T:
            v = qy[T]
        else:
            fr = u - i
            v = qy[i] + fr * (qy[i + 1] - qy[i])
        d = qx[m] - v * rs
        if m == k0 or m == k1:
            total += 0.5 * d * d
        else:
            total += d * d
    return total / T


@njit(cache=True)
def _step_tables(window):
    """Per-step interpolation offsets/fractions and sqrt-slopes.

    For a step of ``dk`` columns and ``dl`` rows, sub-point ``j`` lands at row
    ``l0 + off[dk, dl, j] + frac[dk, dl, j]``.
    """
    off = np.zeros((window + 1, window + 1, window + 1), dtype=np.int64)
    frac = np.zeros((window + 1, window + 1, window + 1))
    rs = np.zeros((window + 1, window + 1))
    for dk in range(1, window + 1):
        for dl in range(1, window + 1):
            rs[dk, dl] = np.sqrt(dl / dk)
            for j in range(dk + 1):
                num = dl * j
                off[dk, dl, j] = num // dk
                frac[dk, dl, j] = (num % dk) / dk
    return off, frac, rs


@njit(cache=True)
def solve(qx, qy, band, window):
    """Forward pass. Returns cost table and predecessor tables.

    ``band`` bounds ``|k - l|`` at every node; ``window`` bounds the step in
    each coordinate. Ties (relative 1e-12) go to the slope nearest 1, then to
    the smallest predecessor ``k``.
    """
    n = qx.shape[0]
    T = n - 1
    window = min(window, T)
    off, frac, rs = _step_tables(window)
    keys = np.zeros((window + 1, window + 1))
    for dk in range(1, window + 1):
        for dl in range(1, window + 1):
            keys[dk, dl] = abs(dl / dk - 1.0)
    dqy = np.zeros(n + 1)
    for i in range(T):
        dqy[i] = qy[i + 1] - qy[i]
    H = np.full((n, n), np.inf)
    pk = np.full((n, n), -1, dtype=np.int64)
    pl = np.full((n, n), -1, dtype=np.int64)
    H[0, 0] = 0.0
    inv_T = 1.0 / T
    for k in range(1, n):
        lo = max(1, k - band)
        hi = min(T, k + band)
        for l in range(lo, hi + 1):
            best = np.inf
            best_lo = np.inf
            best_hi = np.inf
            bkey = np.inf
            bk = -1
            bl = -1
            for kp in range(max(0, k - window), k):
                dk = k - kp
                lp_lo = max(0, l - window, kp - band)
                lp_hi = min(l - 1, kp + band)
                for lp in range(lp_lo, lp_hi + 1):
                    h = H[kp, lp]
                    if h == np.inf:
                        continue
                    dl = l - lp
                    r = rs[dk, dl]
                    d = qx[kp] - qy[lp] * r
                    acc = 0.5 * d * d
                    d = qx[k] - qy[l] * r
                    acc += 0.5 * d * d
                    for j in range(1, dk):
                        i = lp + off[dk, dl, j]
                        d = qx[kp + j] - (qy[i] + frac[dk, dl, j] * dqy[i]) * r
                        acc += d * d
                    c = h + acc * inv_T
                    if c <= best_hi:
                        key = keys[dk, dl]
                        if c < best_lo or key < bkey or (key == bkey and kp < bk):
                            best = c
                            best_lo = c - TIE_RTOL * c
                            best_hi = c + TIE_RTOL * c
                            bkey = key
                            bk = kp
                            bl = lp
            H[k, l] = best
            pk[k, l] = bk
            pl[k, l] = bl
    return H, pk, pl


@njit(cache=True)
def backtrace(pk, pl):
    n = pk.shape[0]
    T = n - 1
    ks = [T]
    ls = [T]
    k = T
    l = T
    while k != 0 or l != 0:
        k2 = pk[k, l]
        l2 = pl[k, l]
        k = k2
        l = l2
        ks.append(k)
        ls.append(l)
    m = len(ks)
    out = np.empty((m, 2), dtype=np.int64)
    for i in range(m):
        out[i, 0] = ks[m - 1 - i]
        out[i, 1] = ls[m - 1 - i]
    return out


def nodes_to_values(nodes: np.ndarray, n_points: int) -> np.ndarray:
    """Sample the piecewise-linear path through ``nodes`` at every grid point."""
    T = n_points - 1
    u = np.empty(n_points)
    for (k0, l0), (k1, l1) in zip(nodes[:-1], nodes[1:]):
        m = np.arange(k0, k1 + 1)
        u[k0:k1 + 1] = l0 + ((l1 - l0) * (m - k0)) / (k1 - k0)
    return u / T
