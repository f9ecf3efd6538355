"""Independent reference solvers used only by the tests."""
import numpy as np


def svr_dual_qp(K, y, C, epsilon):
    """Dense epsilon-SVR dual solved by a generic conic solver (minimisation form)."""
    import cvxpy as cp

    n = len(y)
    a = cp.Variable(n)
    s = cp.Variable(n)
    beta = a - s
    obj = (0.5 * cp.quad_form(beta, cp.psd_wrap(K)) + epsilon * cp.sum(a + s) - y @ beta)
    prob = cp.Problem(cp.Minimize(obj), [a >= 0, a <= C, s >= 0, s <= C, cp.sum(beta) == 0])
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12)
    return float(prob.value), np.asarray(a.value), np.asarray(s.value)


def brute_force_best_split(x, y):
    """Exhaustive scan of every midpoint on a single feature: (threshold, sse)."""
    order = np.argsort(x, kind="stable")
    xs = x[order]
    best = (None, np.inf)
    for i in range(1, len(xs)):
        if xs[i] == xs[i - 1]:
            continue
        thr = 0.5 * (xs[i - 1] + xs[i])
        left, right = y[x <= thr], y[x > thr]
        sse = np.sum((left - left.mean()) ** 2) + np.sum((right - right.mean()) ** 2)
        if sse < best[1] - 1e-12:
            best = (thr, sse)
    return best


def knn_brute(Xtr, ytr, Xte, k):
    out = []
    for x in Xte:
        d = [(float(np.sum((x - r) ** 2)), i) for i, r in enumerate(Xtr)]
        d.sort()
        out.append(np.mean([ytr[i] for _, i in d[:k]]))
    return np.array(out)


def average_linkage_brute(points):
    """Naive agglomeration recomputing cluster distances from scratch each step."""
    P = np.asarray(points, dtype=float)
    clusters = [[i] for i in range(len(P))]
    ids = list(range(len(P)))
    nxt = len(P)
    heights = []
    parts = []
    while len(clusters) > 1:
        best = None
        for i in range(len(clusters)):
            for j in range(i + 1, len(clusters)):
                d = np.mean([np.linalg.norm(P[a] - P[b]) for a in clusters[i]
                             for b in clusters[j]])
                key = (d, min(ids[i], ids[j]), max(ids[i], ids[j]))
                if best is None or key < best[0]:
                    best = (key, i, j)
        (d, _, _), i, j = best
        merged = clusters[i] + clusters[j]
        for idx in sorted((i, j), reverse=True):
            del clusters[idx]
            del ids[idx]
        clusters.append(merged)
        ids.append(nxt)
        nxt += 1
        heights.append(d)
        parts.append(frozenset(frozenset(c) for c in clusters))
    return heights, parts
