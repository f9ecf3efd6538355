"""Acceptance suite: one test, and one printed PASS/FAIL line, per criterion."""
import itertools
import json
import math
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.sparse.linalg import cg

from ensbench import bench, cli
from ensbench.bench import GridConfig, RmseTable, rank_table, rmse, run_grid, summarize
from ensbench.cluster import dendrogram_dot, hierarchical_cluster
from ensbench.data import QSAR_SHAPES, synthetic_suite
from ensbench.ensemble import (EnsembleMode, fit_additive_regression, fit_ensemble,
                               mean_unique_fraction, r2_round)
from ensbench.instance import init_parameters, loss_and_gradients
from ensbench.kernel import KernelSpec, fit_svr, gram
from ensbench.linear import LinearSpec, fit_linear
from ensbench.regressors import RegressorSpec, base_specs
from ensbench.tree import TreeSpec, default_ensemble_spec, fit_tree, fit_tree_ensemble

from oracles import svr_dual_qp

COMPARED = ("rmse.csv", "ranks.csv", "summary.md", "dendrogram_algorithms.dot",
            "dendrogram_algorithms.json", "dendrogram_datasets.dot", "dendrogram_datasets.json")


def _full_run(root: Path, label: str):
    data_dir = root / "data"
    if not (data_dir / "config.json").exists():
        assert cli.cmd_synth(data_dir) == 0
    out = root / label
    start = time.perf_counter()
    code = cli.cmd_run(data_dir / "config.json", out, threads=bench.default_threads())
    return out, code, time.perf_counter() - start


@pytest.fixture(scope="session")
def bench_root(tmp_path_factory):
    return tmp_path_factory.mktemp("acceptance")


@pytest.fixture(scope="session")
def first_run(bench_root):
    return _full_run(bench_root, "run_a")


@pytest.fixture(scope="session")
def second_run(bench_root, first_run):
    return _full_run(bench_root, "run_b")


# ---------------------------------------------------------------- 1

@pytest.mark.slow
def test_c01_grid_cardinality_and_runtime(criterion, first_run):
    with criterion(1, "57-row grid on 4 synthetic datasets within 15 minutes") as c:
        out, code, elapsed = first_run
        assert code == 0, f"cmd_run exit code {code}"
        table = bench.read_rmse_csv(out / "rmse.csv")
        assert len(table.rows) == 57 == len(set(table.rows)), len(table.rows)
        assert table.columns == tuple(QSAR_SHAPES)
        assert np.all(np.isfinite(table.values))
        manifest = json.loads((out / "manifest.json").read_text())
        shapes = [(d["n_samples"], d["n_features"]) for d in manifest["datasets"]]
        assert shapes == [(n, p) for n, p, _ in QSAR_SHAPES.values()]
        assert elapsed < 15 * 60, f"{elapsed:.0f} s"
        c.detail = (f"57 rows x 4 datasets, both families in {elapsed:.0f} s "
                    f"with {bench.default_threads()} worker(s)")


# ---------------------------------------------------------------- 2

def _lasso_kkt(X, y, coef, alpha):
    Xc, yc = X - X.mean(0), y - y.mean()
    grad = Xc.T @ (yc - Xc @ coef) / len(y)
    nz = coef != 0
    a = np.max(np.abs(grad[nz] - alpha * np.sign(coef[nz])), initial=0.0)
    b = np.max(np.abs(grad[~nz]) - alpha, initial=-np.inf)
    return max(a, b)


def test_c02_linear_solver_oracles(criterion):
    with criterion(2, "ridge/lasso/elastic-net/Theil-Sen oracles") as c:
        worst_ridge = worst_kkt = worst_en = 0.0
        for seed in range(20):
            rng = np.random.default_rng(seed)
            X, y = rng.normal(size=(20, 5)), rng.normal(size=20)
            m = fit_linear(LinearSpec("ridge", {"alpha": 1.0}), X, y)
            Xc, yc = X - X.mean(0), y - y.mean()
            w, info = cg(Xc.T @ Xc + np.eye(5), Xc.T @ yc, rtol=1e-15, atol=0.0)
            assert info == 0
            worst_ridge = max(worst_ridge, np.linalg.norm(m.coefficients - w) / np.linalg.norm(w))

            X = rng.normal(size=(40, 8)) * rng.uniform(0.5, 2, 8)
            y = X[:, :3] @ np.array([1.0, -2.0, 0.5]) + 0.5 * rng.normal(size=40)
            hp = {"alpha": 0.1, "standardize": False, "tol": 1e-14, "max_iter": 100000}
            la = fit_linear(LinearSpec("lasso", hp), X, y)
            worst_kkt = max(worst_kkt, _lasso_kkt(X, y, la.coefficients, 0.1))
            en1 = fit_linear(LinearSpec("elastic_net", {**hp, "l1_ratio": 1.0}), X, y)
            en0 = fit_linear(LinearSpec("elastic_net", {**hp, "l1_ratio": 0.0}), X, y)
            ri = fit_linear(LinearSpec("ridge", {"alpha": 0.1 * len(y)}), X, y)
            worst_en = max(worst_en, np.max(np.abs(en1.coefficients - la.coefficients)),
                           np.max(np.abs(en0.coefficients - ri.coefficients)))
        assert worst_ridge <= 1e-8, f"ridge rel err {worst_ridge:.2e}"
        assert worst_kkt <= 1e-6, f"lasso KKT {worst_kkt:.2e}"
        assert worst_en <= 1e-6, f"elastic-net endpoints {worst_en:.2e}"
        for seed in range(50):
            rng = np.random.default_rng(1000 + seed)
            n = int(rng.integers(2, 31))
            x, y = rng.normal(size=n), rng.normal(size=n)
            slopes = [(y[j] - y[i]) / (x[j] - x[i])
                      for i, j in itertools.combinations(range(n), 2)]
            got = fit_linear(LinearSpec("theil_sen"), x[:, None], y).coefficients[0]
            assert got == float(np.median(slopes)), f"Theil-Sen instance {seed}"
        c.detail = (f"ridge {worst_ridge:.1e}, KKT {worst_kkt:.1e}, endpoints {worst_en:.1e}, "
                    "Theil-Sen 50/50 exact")


# ---------------------------------------------------------------- 3

def test_c03_omp_support_recovery(criterion):
    with criterion(3, "OMP recovers planted 3-sparse support at 20 dB") as c:
        hits = 0
        for trial in range(100):
            rng = np.random.default_rng([3, trial])
            n, p = 60, 30
            A = rng.normal(size=(n, p))
            Q, _ = np.linalg.qr(A - A.mean(0))
            support = np.sort(rng.choice(p, 3, replace=False))
            beta = np.zeros(p)
            beta[support] = rng.uniform(1.0, 2.0, 3) * rng.choice([-1, 1], 3)
            signal = Q @ beta
            sigma = math.sqrt(float(signal @ signal) / n / 10 ** (20 / 10))
            y = signal + sigma * rng.normal(size=n)
            m = fit_linear(LinearSpec("omp", {"n_nonzero_coefs": 3}), Q, y)
            hits += sorted(m.diagnostics["selected"]) == support.tolist()
        assert hits >= 95, f"{hits}/100"
        c.detail = f"{hits}/100 exact supports"


# ---------------------------------------------------------------- 4

def test_c04_svr_dual_against_dense_qp(criterion):
    with criterion(4, "SVR dual objective vs dense QP, feasibility") as c:
        worst_obj = worst_feas = 0.0
        for seed in range(50):
            rng = np.random.default_rng([4, seed])
            n = int(rng.integers(3, 13))
            X = rng.normal(size=(n, 3))
            y = np.sin(X[:, 0]) + 0.3 * rng.normal(size=n)
            C, eps = float(rng.uniform(0.2, 5)), float(rng.uniform(0, 0.3))
            spec = KernelSpec(("rbf", "linear", "polynomial")[seed % 3])
            m = fit_svr(C, eps, spec, X, y, tol=1e-9, max_iter=200_000)
            ref, _, _ = svr_dual_qp(gram(spec.resolved(X), X), y, C, eps)
            worst_obj = max(worst_obj, abs(m.diagnostics["objective"] - ref) / max(abs(ref), 1e-12))
            a, s = m.diagnostics["alpha"], m.diagnostics["alpha_star"]
            viol = max(abs(float(np.sum(a - s))), float(np.max(-a)), float(np.max(-s)),
                       float(np.max(a - C)), float(np.max(s - C)), 0.0)
            worst_feas = max(worst_feas, viol)
        assert worst_obj <= 1e-4, f"objective rel err {worst_obj:.2e}"
        assert worst_feas <= 1e-8, f"constraint violation {worst_feas:.2e}"
        c.detail = f"objective rel err {worst_obj:.1e}, constraints {worst_feas:.1e}"


# ---------------------------------------------------------------- 5

def test_c05_tree_mechanics(criterion):
    with criterion(5, "tree interpolation, boosting monotonicity, forest mean") as c:
        for seed in range(100):
            rng = np.random.default_rng([5, seed])
            n, p = int(rng.integers(5, 100)), int(rng.integers(1, 8))
            X, y = rng.normal(size=(n, p)), rng.normal(size=n)
            m = fit_tree(TreeSpec(), X, y)
            assert float(np.mean((m.predict(X) - y) ** 2)) == 0.0, f"instance {seed}"
        rng = np.random.default_rng(55)
        X, y = rng.normal(size=(80, 5)), rng.normal(size=80)
        gb = fit_tree_ensemble(default_ensemble_spec("gradient_boosting", 0), X, y)
        losses = [float(np.mean((y - f) ** 2)) for f in gb.staged_predict(X)]
        assert len(losses) == 101
        assert all(b <= a for a, b in zip(losses, losses[1:])), "training loss increased"
        for kind in ("random_forest", "extra_trees"):
            forest = fit_tree_ensemble(default_ensemble_spec(kind, 1), X, y)
            members = np.stack([t.predict(X) for t in forest.trees])
            assert np.array_equal(forest.predict(X), members.mean(axis=0)), kind
        c.detail = (f"100/100 zero-MSE fits, GB loss {losses[0]:.3f} -> {losses[-1]:.3f} "
                    "monotone, forest mean exact")


# ---------------------------------------------------------------- 6

def test_c06_mlp_gradient_check(criterion):
    with criterion(6, "MLP gradients vs central finite differences") as c:
        worst = 0.0
        h = 1e-5
        for seed in range(20):
            rng = np.random.default_rng([6, seed])
            act = ("relu", "tanh", "logistic")[seed % 3]
            sizes = [int(rng.integers(1, 5)), *map(int, rng.integers(1, 6, int(rng.integers(1, 3)))), 1]
            W, b = init_parameters(sizes, act, rng)
            X = rng.normal(size=(int(rng.integers(2, 9)), sizes[0]))
            y = rng.normal(size=X.shape[0])
            _, gw, gb = loss_and_gradients(W, b, act, 1e-2, X, y)
            for group, grads in ((W, gw), (b, gb)):
                for layer, arr in enumerate(group):
                    for idx in np.ndindex(arr.shape):
                        old = arr[idx]
                        arr[idx] = old + h
                        fp = loss_and_gradients(W, b, act, 1e-2, X, y)[0]
                        arr[idx] = old - h
                        fm = loss_and_gradients(W, b, act, 1e-2, X, y)[0]
                        arr[idx] = old
                        num = (fp - fm) / (2 * h)
                        ana = grads[layer][idx]
                        worst = max(worst, abs(num - ana) / max(abs(num), abs(ana), 1e-6))
        assert worst <= 1e-4, f"max relative error {worst:.2e}"
        c.detail = f"max relative error {worst:.1e} over 20 networks"


# ---------------------------------------------------------------- 7

def test_c07_adaboost_r2_mechanics(criterion):
    with criterion(7, "AdaBoost.R2 update, rejection rule, weight distribution") as c:
        r = r2_round(np.full(3, 1 / 3), np.array([0.0, 0.25, 0.5]))
        raw = np.array([3.0**-1, 3.0**-0.75, 3.0**-0.5]) / 3
        err = float(np.max(np.abs(r.sample_weights - raw / raw.sum())))
        assert err <= 1e-12, f"hand example error {err:.1e}"
        rej = r2_round(np.full(3, 1 / 3), np.array([0.0, 0.5, 1.0]))
        assert not rej.accepted
        drift = 0.0
        rounds = 0
        for seed in range(50):
            rng = np.random.default_rng([7, seed])
            n = int(rng.integers(10, 60))
            X = rng.normal(size=(n, 3))
            y = X[:, 0] - X[:, 1] ** 2 + rng.normal(size=n)
            base = RegressorSpec(("decision_tree", "ridge", "knn")[seed % 3],
                                 {"max_depth": 3} if seed % 3 == 0 else {})
            m = fit_additive_regression(base, EnsembleMode("additive_regression", seed=seed),
                                        X, y)
            for w in m.diagnostics["sample_weight_history"]:
                assert np.all(w >= 0)
                drift = max(drift, abs(float(w.sum()) - 1.0))
                rounds += 1
            losses = m.diagnostics["average_losses"]
            assert all(L < 0.5 for L in losses[:-1])
            assert (losses[-1] >= 0.5) == bool(m.diagnostics["rejected_rounds"])
        assert drift <= 1e-12, f"weight drift {drift:.1e}"
        c.detail = f"hand example {err:.1e}, drift {drift:.1e} over {rounds} weight vectors"


# ---------------------------------------------------------------- 8

def test_c08_bagging_statistics(criterion):
    with criterion(8, "bootstrap unique fraction and variance reduction") as c:
        frac = mean_unique_fraction(100, 10_000, seed=8)
        assert 0.62 <= frac <= 0.645, f"unique fraction {frac:.4f}"
        tree = RegressorSpec("decision_tree")
        ratios = []
        for ds in synthetic_suite(0):
            rows = np.random.default_rng([8, ds.n_samples])
            test_rows = rows.choice(ds.n_samples, ds.n_samples // 4, replace=False)
            pool = np.setdiff1d(np.arange(ds.n_samples), test_rows)
            Xt = ds.features[test_rows]
            single, bagged = [], []
            for trial in range(50):
                tr = np.random.default_rng([8, trial]).choice(pool, len(pool) // 2,
                                                              replace=False)
                X, y = ds.features[tr], ds.target[tr]
                single.append(fit_ensemble(tree, EnsembleMode("single", seed=trial),
                                           X, y).predict(Xt))
                bagged.append(fit_ensemble(tree, EnsembleMode("bagging", seed=trial),
                                           X, y).predict(Xt))
            v1 = float(np.var(np.array(single), axis=0).mean())
            v10 = float(np.var(np.array(bagged), axis=0).mean())
            assert v10 <= v1, f"{ds.name}: bagged variance {v10:.4f} > single {v1:.4f}"
            ratios.append(v10 / v1)
        c.detail = (f"unique fraction {frac:.4f}, variance ratio bagged/single "
                    + ", ".join(f"{r:.2f}" for r in ratios))


# ---------------------------------------------------------------- 9

def test_c09_rmse_ranking_arithmetic(criterion):
    with criterion(9, "RMSE example, rank permutations, summary arithmetic") as c:
        assert abs(rmse([1, 2], [0, 0]) - math.sqrt(2.5)) <= 1e-12
        rng = np.random.default_rng(9)
        for _ in range(1000):
            K, D = int(rng.integers(1, 60)), int(rng.integers(1, 6))
            pool = np.concatenate([rng.uniform(0, 2, 6), [0.5, 0.5, math.inf]])
            v = rng.choice(pool, size=(K, D))
            r = rank_table(RmseTable(tuple(map(str, range(K))), tuple(map(str, range(D))), v))
            for j in range(D):
                assert np.array_equal(np.sort(r.ranks[:, j]), np.arange(K))
        # published rank rows for the three Lasso configurations over four datasets
        bases = base_specs()
        modes = [EnsembleMode("single"), EnsembleMode("bagging"),
                 EnsembleMode("additive_regression")]
        labels = GridConfig().row_labels
        wanted = {"Lasso Regression": (25, 2, 25, 44), "BG-Lasso Regression": (18, 6, 18, 43),
                  "AR-Lasso Regression": (31, 4, 31, 40)}
        cols = []
        for j in range(4):
            fixed = {labels.index(k): v[j] for k, v in wanted.items()}
            free = iter(r for r in range(57) if r not in fixed.values())
            cols.append([fixed[i] if i in fixed else next(free) for i in range(57)])
        table = RmseTable(tuple(labels), tuple(QSAR_SHAPES), np.array(cols, float).T + 0.5)
        summary = summarize(rank_table(table), bases, modes)
        lasso = summary.rows.index("Lasso Regression")
        assert summary.cells[lasso].tolist() == [21.25, 26.5, 24.0]
        assert f"{summary.avg_column[lasso]:.2f}" == "23.92"
        c.detail = "sqrt(2.5) exact, 1000 tables permuted, Lasso row Avg 23.92"


# ---------------------------------------------------------------- 10

def test_c10_ensembles_improve_unbounded_tree(criterion):
    with criterion(10, "BG and AR trees rank at or above the single tree") as c:
        start = time.perf_counter()
        cfg = GridConfig(bases=(RegressorSpec("decision_tree"),), master_seed=42)
        table = run_grid(cfg, synthetic_suite(0), threads=bench.default_threads())
        ranks = rank_table(table)
        mean = dict(zip(table.rows, ranks.mean))
        elapsed = time.perf_counter() - start
        single = mean["Decision Tree"]
        assert mean["BG-Decision Tree"] <= single, mean
        assert mean["AR-Decision Tree"] <= single, mean
        assert elapsed < 120, f"{elapsed:.0f} s"
        c.detail = (f"mean ranks BG {mean['BG-Decision Tree']:.2f}, "
                    f"AR {mean['AR-Decision Tree']:.2f}, single {single:.2f}; {elapsed:.0f} s")


# ---------------------------------------------------------------- 11

def test_c11_clustering(criterion):
    with criterion(11, "average-linkage example and permutation isomorphism") as c:
        d = hierarchical_cluster(np.array([0.0, 1.0, 10.0]), ["a", "b", "c"])
        assert d.heights.tolist() == [1.0, 9.5], d.heights
        dot = dendrogram_dot(d)
        assert 'label="h=1"' in dot and 'label="h=9.5"' in dot
        for seed in range(200):
            rng = np.random.default_rng([11, seed])
            P = rng.normal(size=(6, int(rng.integers(1, 5))))
            labels = [f"p{i}" for i in range(6)]
            perm = rng.permutation(6)
            a = hierarchical_cluster(P, labels)
            b = hierarchical_cluster(P[perm], [labels[i] for i in perm])
            assert np.allclose(a.heights, b.heights, rtol=1e-12, atol=1e-14), seed
            assert a.partitions() == b.partitions(), seed
        c.detail = "heights (1, 9.5); 200/200 permuted instances isomorphic"


# ---------------------------------------------------------------- 12

@pytest.mark.slow
def test_c12_determinism(criterion, first_run, second_run):
    with criterion(12, "two full runs produce byte-identical outputs") as c:
        (a, code_a, _), (b, code_b, _) = first_run, second_run
        assert code_a == code_b == 0
        checked = 0
        for family in ("", "reduced"):
            for name in COMPARED:
                pa, pb = a / family / name, b / family / name
                assert pa.read_bytes() == pb.read_bytes(), f"{family}/{name} differs"
                checked += 1
        c.detail = f"{checked} files identical across two runs"
