"""Independent reference computations used by the test-suite.

Nothing here imports the code under test.
"""
from itertools import combinations

import numpy as np


def l1_support_enumeration(M, b, tol=1e-9):
    """Minimum-L1 solution of ``M z = b`` by enumerating basic solutions.

    An optimal vertex of the split LP is supported on at most ``m`` linearly
    independent columns, so every column subset of size ``rank(M)`` is solved
    exactly and the cheapest feasible one kept.
    """
    M = np.asarray(M, dtype=float)
    b = np.asarray(b, dtype=float)
    m, p = M.shape
    if not np.any(b):
        return np.zeros(p), 0.0
    r = np.linalg.matrix_rank(M)
    subsets = np.array(list(combinations(range(p), r)))
    blocks = M[:, subsets].transpose(1, 0, 2)  # (n_subsets, m, r)
    best_z, best_obj = None, np.inf
    if r == m:
        conds = np.linalg.cond(blocks)
        ok = conds < 1e10
        sols = np.linalg.solve(blocks[ok], np.broadcast_to(b, (ok.sum(), m))[..., None])[..., 0]
        objs = np.abs(sols).sum(axis=1)
        j = int(np.argmin(objs))
        best_obj = objs[j]
        best_z = np.zeros(p)
        best_z[subsets[ok][j]] = sols[j]
        return best_z, float(best_obj)
    for cols, blk in zip(subsets, blocks):
        zs, *_ = np.linalg.lstsq(blk, b, rcond=None)
        if np.linalg.norm(blk @ zs - b) > tol * (1 + np.linalg.norm(b)):
            continue
        obj = np.abs(zs).sum()
        if obj < best_obj:
            best_obj = obj
            best_z = np.zeros(p)
            best_z[list(cols)] = zs
    return best_z, float(best_obj)


def random_bp_instance(rng, m_max=6, p_max=12, sparsity=2):
    m = int(rng.integers(1, m_max + 1))
    p = int(rng.integers(max(m, sparsity), p_max + 1))
    while True:
        M = rng.standard_normal((m, p))
        if np.linalg.cond(M) < 1e3:
            break
    z0 = np.zeros(p)
    k = min(sparsity, p)
    idx = rng.choice(p, size=k, replace=False)
    z0[idx] = rng.standard_normal(k)
    return M, M @ z0


def dense_laplacian_elementwise(W):
    W = np.asarray(W, dtype=float)
    n = W.shape[0]
    d = W.sum(axis=1)
    L = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if d[i] > 0 and d[j] > 0:
                L[i, j] = (1.0 if i == j else 0.0) - W[i, j] / np.sqrt(d[i] * d[j])
            else:
                L[i, j] = 1.0 if i == j else 0.0
    return L


def pearson_clipped(F):
    F = np.asarray(F, dtype=float)
    n, p = F.shape
    W = np.zeros((p, p))
    for i in range(p):
        for j in range(p):
            if i == j:
                continue
            a, b = F[:, i], F[:, j]
            sa, sb = a.std(ddof=1), b.std(ddof=1)
            if sa == 0 or sb == 0:
                continue
            r = np.sum((a - a.mean()) * (b - b.mean())) / ((n - 1) * sa * sb)
            W[i, j] = max(r, 0.0)
    return W


def average_precision_bruteforce(scores, relevance):
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    hits, total = 0, 0.0
    for rank, i in enumerate(order, start=1):
        if relevance[i]:
            hits += 1
            total += hits / rank
    return total / hits
