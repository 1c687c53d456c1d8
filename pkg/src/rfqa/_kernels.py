"""Compiled inner loops for tree growing.

SplitMix64 supplies the per-node feature draws: a node's stream starts from
``mix(tree_key ^ node_id * GOLDEN)`` and advances by the golden-ratio
increment, so any node's draws can be reproduced without replaying the rest
of the tree.
"""

import numpy as np
from numba import njit

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


@njit(cache=True, nogil=True)
def splitmix_mix(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@njit(cache=True, nogil=True)
def splitmix_sequence(state, count):
    """The first ``count`` SplitMix64 outputs from ``state``."""
    out = np.empty(count, dtype=np.uint64)
    s = np.uint64(state)
    for i in range(count):
        s = s + GOLDEN
        out[i] = splitmix_mix(s)
    return out


@njit(cache=True, nogil=True)
def draw_features(tree_key, node_id, n_features, mtry):
    """``mtry`` distinct feature indices, sorted, by a partial Fisher-Yates shuffle."""
    s = splitmix_mix(np.uint64(tree_key) ^ (np.uint64(node_id) * GOLDEN))
    perm = np.arange(n_features)
    for i in range(mtry):
        bound = np.uint64(n_features - i)
        # reject the low 2**64 mod bound outputs so r % bound is unbiased
        floor = (np.uint64(0) - bound) % bound
        while True:
            s = s + GOLDEN
            r = splitmix_mix(s)
            if r >= floor:
                break
        j = i + np.int64(r % bound)
        perm[i], perm[j] = perm[j], perm[i]
    return np.sort(perm[:mtry])


@njit(cache=True, nogil=True)
def best_split(X, y, idx, feats, min_leaf, rel_tol):
    """Best (feature, threshold, gain) for the samples ``idx`` over ``feats``.

    ``feats`` must be sorted. Candidates within ``rel_tol * (1 + SSE)`` of the
    best gain tie; the first in (feature, threshold) order wins. Returns
    feature -1 when no admissible split has a gain above the tolerance.
    """
    n = idx.size
    m = feats.size
    mean = 0.0
    for i in range(n):
        mean += y[idx[i]]
    mean /= n
    yc = np.empty(n)
    tot = 0.0
    tot2 = 0.0
    for i in range(n):
        v = y[idx[i]] - mean
        yc[i] = v
        tot += v
        tot2 += v * v
    parent = tot2 - tot * tot / n
    tol = rel_tol * (1.0 + tot2)

    gains = np.full((m, n - 1), -np.inf)
    thr = np.zeros((m, n - 1))
    xs = np.empty(n)
    top = -np.inf
    for c in range(m):
        f = feats[c]
        for i in range(n):
            xs[i] = X[idx[i], f]
        order = np.argsort(xs, kind="mergesort")
        cs = 0.0
        cs2 = 0.0
        for k in range(1, n):
            v = yc[order[k - 1]]
            cs += v
            cs2 += v * v
            if k < min_leaf or n - k < min_leaf:
                continue
            lo = xs[order[k - 1]]
            hi = xs[order[k]]
            if not hi > lo:
                continue
            g = parent - (cs2 - cs * cs / k) - ((tot2 - cs2) - (tot - cs) ** 2 / (n - k))
            gains[c, k - 1] = g
            t = (lo + hi) / 2.0
            thr[c, k - 1] = t if t < hi else lo
            if g > top:
                top = g
    if not top > tol:
        return -1, 0.0, top
    for c in range(m):
        for k in range(n - 1):
            if gains[c, k] >= top - tol:
                return feats[c], thr[c, k], gains[c, k]
    return -1, 0.0, top
