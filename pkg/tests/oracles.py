"""Independent reference computations used by the test-suite.

Nothing here imports the code paths it is used to check.
"""

import itertools

import numpy as np


def brute_average(x, y, lo, hi):
    """Mean of ``y`` over rows with ``lo <= x <= hi`` (closed box), or None."""
    x = np.asarray(x, dtype=float).reshape(len(y), -1)
    inside = np.all((x >= lo) & (x <= hi), axis=1)
    if not inside.any():
        return None
    return float(np.mean(np.asarray(y, dtype=float)[inside]))


def _corner_candidates(x, q):
    lows, highs = [], []
    for j in range(x.shape[1]):
        col = np.unique(x[:, j])
        lows.append(sorted(set(col[col <= q[j]].tolist()) | {float(q[j])}))
        highs.append(sorted(set(col[col >= q[j]].tolist()) | {float(q[j])}))
    return list(itertools.product(*lows)), list(itertools.product(*highs))


def brute_lower(x, y, q):
    """max over a <= q of min over b >= q of Av([a, b]).

    A lower corner counts only if Av([a, b]) exists for every b, i.e. the box
    [a, q] holds an observation.
    """
    x = np.asarray(x, dtype=float).reshape(len(y), -1)
    q = np.asarray(q, dtype=float)
    A, B = _corner_candidates(x, q)
    best = -np.inf
    for a in A:
        if brute_average(x, y, np.array(a), q) is None:
            continue
        best = max(best, min(brute_average(x, y, np.array(a), np.array(b)) for b in B))
    return best


def brute_upper(x, y, q):
    """min over b >= q of max over a <= q of Av([a, b]), over b with [q, b] occupied."""
    x = np.asarray(x, dtype=float).reshape(len(y), -1)
    q = np.asarray(q, dtype=float)
    A, B = _corner_candidates(x, q)
    best = np.inf
    for b in B:
        if brute_average(x, y, q, np.array(b)) is None:
            continue
        best = min(best, max(brute_average(x, y, np.array(a), np.array(b)) for a in A))
    return best


def monotone_qp(y, w, pairs):
    """Exact weighted isotonic projection by active-set enumeration.

    Minimises sum w_i (t_i - y_i)^2 subject to t_u <= t_v for (u, v) in
    ``pairs``. Every subset of constraints is tried as an equality set; the
    best feasible stationary point is the optimum. Only for tiny problems.
    """
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    n = y.size
    best, best_obj = None, np.inf
    for r in range(len(pairs) + 1):
        for active in itertools.combinations(pairs, r):
            m = len(active)
            K = np.zeros((n + m, n + m))
            rhs = np.zeros(n + m)
            K[:n, :n] = np.diag(2 * w)
            rhs[:n] = 2 * w * y
            for k, (u, v) in enumerate(active):
                K[n + k, u] = 1.0
                K[n + k, v] = -1.0
                K[u, n + k] = 1.0
                K[v, n + k] = -1.0
            sol, *_ = np.linalg.lstsq(K, rhs, rcond=None)
            t = sol[:n]
            if any(t[u] > t[v] + 1e-12 for u, v in pairs):
                continue
            obj = float(np.sum(w * (t - y) ** 2))
            if obj < best_obj - 1e-15:
                best, best_obj = t, obj
    return best


def chain_pairs(n):
    return [(i, i + 1) for i in range(n - 1)]
