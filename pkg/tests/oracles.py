"""Slow, obviously-correct reference implementations used as test oracles.

Nothing here imports the package's numerical routines.
"""

import itertools

import numpy as np


def bartlett(x):
    return max(0.0, 1.0 - abs(x))


def hac_loop(x, weight, m, demean=True):
    """Quadruple loop over (i, n, t, s)."""
    x = np.asarray(x, dtype=float)
    N, T = x.shape
    if demean:
        x = x - x.mean(axis=1, keepdims=True)
    out = np.zeros((N, N))
    for i in range(N):
        for n in range(N):
            acc = 0.0
            for t in range(T):
                for s in range(T):
                    acc += weight((t - s) / m) * x[i, t] * x[n, s]
            out[i, n] = acc / T
    return out


def ma_direct(coeffs, eps, T):
    """x_t = sum_l B_l eps_{t-l}, t = 1..T, with eps rows P-1+t indexing period t."""
    L = len(coeffs) - 1
    P = eps.shape[0] - T
    N = coeffs[0].shape[0]
    x = np.zeros((T, N))
    for t in range(1, T + 1):
        for ell in range(L + 1):
            x[t - 1] += coeffs[ell] @ eps[P - 1 + t - ell]
    return x


def brute_force_partition(x, J):
    """Minimum of S over every assignment of N points to exactly J nonempty groups."""
    x = np.asarray(x, dtype=float)
    best = np.inf
    best_labels = None
    for labels in itertools.product(range(J), repeat=x.size):
        labels = np.array(labels)
        if len(set(labels.tolist())) != J:
            continue
        s = sum(np.sum((x[labels == g] - x[labels == g].mean()) ** 2) for g in range(J)) / x.size
        if s < best - 1e-15:
            best, best_labels = s, labels
    return best, best_labels


def same_partition(a, b):
    """Label-free equality of two partitions."""
    a, b = np.asarray(a), np.asarray(b)
    return all(np.array_equal(a == a[i], b == b[i]) for i in range(a.size))


def annihilator_qr(z):
    q, r = np.linalg.qr(z)
    keep = np.abs(np.diag(r)) > 1e-10 * np.abs(r).max()
    q = q[:, keep]
    return np.eye(z.shape[0]) - q @ q.T
