"""Fast in-package oracle checks, run by ``ensbench selftest``."""
from __future__ import annotations

import itertools
import math
from typing import Callable

import numpy as np
from scipy.sparse.linalg import cg

from . import bench, cluster, ensemble, instance, kernel, linear, tree


def _ridge_vs_cg() -> str:
    rng = np.random.default_rng(1)
    X = rng.normal(size=(40, 8))
    y = X @ rng.normal(size=8) + 0.1 * rng.normal(size=40)
    m = linear.fit_linear(linear.LinearSpec("ridge", {"alpha": 0.7}), X, y)
    Xc, yc = X - X.mean(0), y - y.mean()
    w, info = cg(Xc.T @ Xc + 0.7 * np.eye(8), Xc.T @ yc, rtol=1e-14, atol=0.0, maxiter=1000)
    err = np.linalg.norm(m.coefficients - w) / np.linalg.norm(w)
    assert err <= 1e-8, f"relative error {err:.2e}"
    return f"rel err {err:.1e}"


def _theil_sen_pairs() -> str:
    rng = np.random.default_rng(2)
    for _ in range(20):
        n = int(rng.integers(3, 20))
        x, y = rng.normal(size=n), rng.normal(size=n)
        slopes = [(y[j] - y[i]) / (x[j] - x[i]) for i, j in itertools.combinations(range(n), 2)]
        assert linear.pairwise_slope_median(x, y)[0] == float(np.median(slopes))
    return "20 instances exact"


def _svr_constraints() -> str:
    rng = np.random.default_rng(3)
    X = rng.normal(size=(12, 3))
    y = X[:, 0] + 0.1 * rng.normal(size=12)
    m = kernel.fit_svr(1.0, 0.1, kernel.KernelSpec("rbf"), X, y, tol=1e-8)
    a, s = m.diagnostics["alpha"], m.diagnostics["alpha_star"]
    assert m.diagnostics["converged"]
    assert np.all(a >= 0) and np.all(a <= 1.0) and np.all(s >= 0) and np.all(s <= 1.0)
    eq = abs(float(np.sum(a - s)))
    assert eq <= 1e-8, f"equality residual {eq:.1e}"
    return f"equality residual {eq:.1e}"


def _tree_interpolates() -> str:
    rng = np.random.default_rng(4)
    X = rng.normal(size=(60, 4))
    y = rng.normal(size=60)
    m = tree.fit_tree(tree.TreeSpec(), X, y)
    mse = float(np.mean((m.predict(X) - y) ** 2))
    assert mse == 0.0, f"training mse {mse}"
    return "zero training error"


def _mlp_gradient() -> str:
    rng = np.random.default_rng(5)
    X, y = rng.normal(size=(7, 3)), rng.normal(size=7)
    W, b = instance.init_parameters([3, 4, 1], "tanh", rng)
    _, gw, _ = instance.loss_and_gradients(W, b, "tanh", 0.1, X, y)
    worst = 0.0
    h = 1e-6
    for idx in np.ndindex(W[0].shape):
        Wp = [w.copy() for w in W]
        Wm = [w.copy() for w in W]
        Wp[0][idx] += h
        Wm[0][idx] -= h
        fp = instance.loss_and_gradients(Wp, b, "tanh", 0.1, X, y)[0]
        fm = instance.loss_and_gradients(Wm, b, "tanh", 0.1, X, y)[0]
        num = (fp - fm) / (2 * h)
        worst = max(worst, abs(num - gw[0][idx]) / max(abs(num), abs(gw[0][idx]), 1e-8))
    assert worst <= 1e-4, f"max relative error {worst:.2e}"
    return f"max rel err {worst:.1e}"


def _r2_update() -> str:
    w = np.full(3, 1 / 3)
    r = ensemble.r2_round(w, np.array([0.0, 0.25, 0.5]))
    want = np.array([3.0**-1, 3.0**-0.75, 3.0**-0.5]) / 3
    want /= want.sum()
    assert np.max(np.abs(r.sample_weights - want)) <= 1e-12
    return "hand example matches"


def _rmse_and_ranks() -> str:
    assert abs(bench.rmse([1, 2], [0, 0]) - math.sqrt(2.5)) <= 1e-12
    t = bench.RmseTable(("a", "b", "c"), ("d",), np.array([[0.3], [0.1], [0.2]]))
    assert bench.rank_table(t).ranks[:, 0].tolist() == [2, 0, 1]
    return "rmse and rank examples"


def _cluster_example() -> str:
    d = cluster.hierarchical_cluster(np.array([[0.0], [1.0], [10.0]]), ["a", "b", "c"])
    assert d.heights.tolist() == [1.0, 9.5], d.heights
    return "heights (1, 9.5)"


CHECKS: dict[str, Callable[[], str]] = {
    "ridge closed form vs conjugate gradient": _ridge_vs_cg,
    "univariate Theil-Sen vs pairwise slopes": _theil_sen_pairs,
    "SVR box and equality constraints": _svr_constraints,
    "unbounded tree interpolates distinct rows": _tree_interpolates,
    "MLP gradient vs finite differences": _mlp_gradient,
    "AdaBoost.R2 weight update": _r2_update,
    "RMSE and ranking": _rmse_and_ranks,
    "average-linkage three-point example": _cluster_example,
}


def run_selftest(echo: Callable[[str], None] = print) -> bool:
    ok = True
    for name, check in CHECKS.items():
        try:
            detail = check()
            echo(f"PASS  {name}: {detail}")
        except Exception as exc:  # report every check, then fail overall
            ok = False
            echo(f"FAIL  {name}: {type(exc).__name__}: {exc}")
    return ok
