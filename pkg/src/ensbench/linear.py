"""Linear-family regressors: ridge, lasso, elastic net, LARS-lasso, OMP,
Bayesian ridge, ARD, passive-aggressive, Huber and Theil-Sen.

Penalised least-squares objectives use the ``1/(2n)`` loss scaling, e.g. lasso
minimises ``||y - Xw||^2 / (2n) + alpha * ||w||_1``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy import linalg, optimize
from scipy.special import comb

VARIANTS = ("ridge", "lasso", "elastic_net", "lasso_lars", "omp", "bayesian_ridge",
            "ard", "passive_aggressive", "huber", "theil_sen", "ols")

DEFAULTS = {
    "ridge": {"alpha": 1.0},
    "lasso": {"alpha": 1.0, "tol": 1e-4, "max_iter": 1000, "standardize": True},
    "elastic_net": {"alpha": 1.0, "l1_ratio": 0.5, "tol": 1e-4, "max_iter": 1000,
                    "standardize": True},
    "lasso_lars": {"alpha": 1.0, "max_iter": 500, "standardize": True},
    "omp": {"n_nonzero_coefs": None, "fraction": 0.10},
    "bayesian_ridge": {"n_iter": 300, "tol": 1e-3, "alpha_1": 1e-6, "alpha_2": 1e-6,
                       "lambda_1": 1e-6, "lambda_2": 1e-6},
    "ard": {"n_iter": 300, "tol": 1e-3, "alpha_1": 1e-6, "alpha_2": 1e-6,
            "lambda_1": 1e-6, "lambda_2": 1e-6, "threshold_lambda": 1e4},
    "passive_aggressive": {"C": 1.0, "epsilon": 0.1, "max_iter": 1000, "tol": 1e-3,
                           "n_iter_no_change": 5},
    "huber": {"epsilon": 1.35, "alpha": 1e-4, "max_iter": 100, "tol": 1e-5},
    "theil_sen": {"max_subpopulation": 10_000, "n_subsamples": None,
                  "spatial_tol": 1e-7, "spatial_max_iter": 300},
    "ols": {},
}


@dataclass(frozen=True)
class LinearSpec:
    variant: str
    hyperparameters: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown linear variant {self.variant!r}")
        unknown = set(self.hyperparameters) - set(DEFAULTS[self.variant])
        if unknown:
            raise ValueError(f"unknown {self.variant} hyperparameters: {sorted(unknown)}")
        hp = self.params
        for key in ("alpha", "C"):
            if key in hp and hp[key] < 0:
                raise ValueError(f"{key} must be >= 0")
        if "l1_ratio" in hp and not 0.0 <= hp["l1_ratio"] <= 1.0:
            raise ValueError("l1_ratio must lie in [0, 1]")
        if self.variant == "omp" and hp["n_nonzero_coefs"] is not None and hp["n_nonzero_coefs"] < 1:
            raise ValueError("OMP atom budget must be >= 1")
        if self.variant == "huber" and not hp["epsilon"] > 1.0:
            raise ValueError("Huber threshold must be > 1")

    @property
    def params(self) -> dict:
        return {**DEFAULTS[self.variant], **self.hyperparameters}


@dataclass(frozen=True, eq=False)
class LinearModel:
    coefficients: np.ndarray
    intercept: float
    variant: str
    diagnostics: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return bool(self.diagnostics.get("converged", True))

    def predict(self, X) -> np.ndarray:
        return predict_linear(self, X)


def predict_linear(model: LinearModel, features) -> np.ndarray:
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != len(model.coefficients):
        raise ValueError(
            f"model expects {len(model.coefficients)} features, got shape {X.shape}")
    return X @ model.coefficients + model.intercept


# ------------------------------------------------------------------ preprocessing

@dataclass
class _Centered:
    X: np.ndarray
    y: np.ndarray
    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: float
    constant: np.ndarray


def _center(X, y, scale: bool) -> _Centered:
    constant = np.ptp(X, axis=0) == 0
    x_mean = X.mean(axis=0)
    Xc = X - x_mean
    Xc[:, constant] = 0.0
    x_scale = np.ones(X.shape[1])
    if scale:
        sd = Xc.std(axis=0)
        x_scale[~constant] = sd[~constant]
        Xc /= x_scale
    y_mean = float(y.mean())
    return _Centered(Xc, y - y_mean, x_mean, x_scale, y_mean, constant)


def _to_model(c: _Centered, coef_scaled, variant, diagnostics) -> LinearModel:
    coef = np.asarray(coef_scaled, dtype=np.float64) / c.x_scale
    coef[c.constant] = 0.0
    intercept = c.y_mean - float(c.x_mean @ coef)
    return LinearModel(coef, intercept, variant, diagnostics)


# ------------------------------------------------------------------ solvers

def ridge_solve(Xc: np.ndarray, yc: np.ndarray, alpha: float) -> np.ndarray:
    """Closed-form ridge on centred data: argmin ||y - Xw||^2 + alpha ||w||^2."""
    n, p = Xc.shape
    if alpha == 0:
        return linalg.lstsq(Xc, yc)[0]
    if p <= n:
        A = Xc.T @ Xc
        A[np.diag_indices(p)] += alpha
        return linalg.solve(A, Xc.T @ yc, assume_a="pos")
    K = Xc @ Xc.T
    K[np.diag_indices(n)] += alpha
    return Xc.T @ linalg.solve(K, yc, assume_a="pos")


@njit(cache=True)
def _enet_cd(XT, y, w, l1, l2, max_iter, tol):
    p, n = XT.shape
    R = y.copy()
    for j in range(p):
        if w[j] != 0.0:
            for i in range(n):
                R[i] -= w[j] * XT[j, i]
    norms = np.zeros(p)
    for j in range(p):
        s = 0.0
        for i in range(n):
            s += XT[j, i] * XT[j, i]
        norms[j] = s
    yy = 0.0
    for i in range(n):
        yy += y[i] * y[i]
    tol_scaled = tol * yy
    gap = tol_scaled + 1.0
    for it in range(max_iter):
        w_max = 0.0
        d_w_max = 0.0
        for j in range(p):
            if norms[j] == 0.0:
                continue
            w_j = w[j]
            if w_j != 0.0:
                for i in range(n):
                    R[i] += w_j * XT[j, i]
            tmp = 0.0
            for i in range(n):
                tmp += XT[j, i] * R[i]
            mag = abs(tmp) - l1
            if mag > 0.0:
                w[j] = math.copysign(mag, tmp) / (norms[j] + l2)
            else:
                w[j] = 0.0
            if w[j] != 0.0:
                for i in range(n):
                    R[i] -= w[j] * XT[j, i]
            d = abs(w[j] - w_j)
            if d > d_w_max:
                d_w_max = d
            if abs(w[j]) > w_max:
                w_max = abs(w[j])
        if w_max == 0.0 or d_w_max / w_max < tol or it == max_iter - 1:
            # duality gap of the n-scaled elastic-net problem
            dual_norm = 0.0
            for j in range(p):
                s = 0.0
                for i in range(n):
                    s += XT[j, i] * R[i]
                s -= l2 * w[j]
                if abs(s) > dual_norm:
                    dual_norm = abs(s)
            r_norm2 = 0.0
            ry = 0.0
            for i in range(n):
                r_norm2 += R[i] * R[i]
                ry += R[i] * y[i]
            w_norm2 = 0.0
            l1_norm = 0.0
            for j in range(p):
                w_norm2 += w[j] * w[j]
                l1_norm += abs(w[j])
            if dual_norm > l1:
                const = l1 / dual_norm
                gap = 0.5 * (r_norm2 + r_norm2 * const * const)
            else:
                const = 1.0
                gap = r_norm2
            gap += l1 * l1_norm - const * ry + 0.5 * l2 * (1.0 + const * const) * w_norm2
            if gap < tol_scaled:
                return w, gap, it + 1, True
    return w, gap, max_iter, False


def _fit_enet(X, y, alpha, l1_ratio, tol, max_iter, standardize, variant):
    c = _center(X, y, standardize)
    n, p = c.X.shape
    XT = np.ascontiguousarray(c.X.T)
    w, gap, n_iter, ok = _enet_cd(XT, np.ascontiguousarray(c.y), np.zeros(p),
                                  alpha * l1_ratio * n, alpha * (1.0 - l1_ratio) * n,
                                  int(max_iter), float(tol))
    return _to_model(c, w, variant, {"iterations": n_iter, "converged": bool(ok),
                                     "duality_gap": float(gap)})


def lars_lasso_path_point(X: np.ndarray, y: np.ndarray, alpha: float,
                          max_iter: int = 500) -> tuple[np.ndarray, int, bool]:
    """LARS with the lasso modification, stopped where max |X^T r| / n == alpha.

    ``X`` and ``y`` must already be centred.
    """
    n, p = X.shape
    w = np.zeros(p)
    usable = np.any(X != 0, axis=0)
    C = X.T @ y / n
    if not usable.any() or np.max(np.abs(C[usable])) <= alpha:
        return w, 0, True
    active: list[int] = [int(np.argmax(np.where(usable, np.abs(C), -1.0)))]
    max_active = min(n - 1, int(usable.sum()))
    just_dropped = -1
    for it in range(1, max_iter + 1):
        r = y - X @ w
        C = X.T @ r / n
        A = np.array(active)
        s = np.sign(C[A])
        c_max = float(np.max(np.abs(C[A])))
        XA = X[:, A]
        G = XA.T @ XA / n
        try:
            d = linalg.solve(G, s, assume_a="sym")
        except linalg.LinAlgError:
            d = linalg.lstsq(G, s)[0]
        a = X.T @ (XA @ d) / n

        gamma = c_max - alpha
        event, who = "alpha", -1
        if len(active) < max_active:
            inactive = np.ones(p, bool)
            inactive[A] = False
            inactive &= usable
            if just_dropped >= 0:
                inactive[just_dropped] = False
            idx = np.flatnonzero(inactive)
            if len(idx):
                with np.errstate(divide="ignore", invalid="ignore"):
                    g1 = (c_max - C[idx]) / (1.0 - a[idx])
                    g2 = (c_max + C[idx]) / (1.0 + a[idx])
                cand = np.where(g1 > 1e-14, g1, np.inf)
                cand = np.minimum(cand, np.where(g2 > 1e-14, g2, np.inf))
                k = int(np.argmin(cand))
                if cand[k] < gamma:
                    gamma, event, who = float(cand[k]), "add", int(idx[k])
        with np.errstate(divide="ignore", invalid="ignore"):
            g_drop = np.where(d != 0, -w[A] / d, np.inf)
        g_drop = np.where(g_drop > 1e-14, g_drop, np.inf)
        k = int(np.argmin(g_drop))
        if g_drop[k] < gamma:
            gamma, event, who = float(g_drop[k]), "drop", int(A[k])

        w[A] += gamma * d
        just_dropped = -1
        if event == "alpha":
            return w, it, True
        if event == "add":
            active.append(who)
        else:
            w[who] = 0.0
            active.remove(who)
            just_dropped = who
            if not active:
                return w, it, True
    return w, max_iter, False


def _fit_omp(X, y, budget):
    c = _center(X, y, scale=False)
    n, p = c.X.shape
    norms = np.linalg.norm(c.X, axis=0)
    usable = norms > 0
    Xn = np.zeros_like(c.X)
    Xn[:, usable] = c.X[:, usable] / norms[usable]
    budget = min(budget, int(usable.sum()))
    residual = c.y.copy()
    y_norm2 = float(c.y @ c.y)
    selected: list[int] = []
    coef_n = np.zeros(0)
    for _ in range(budget):
        corr = np.abs(Xn.T @ residual)
        corr[~usable] = -1.0
        corr[selected] = -1.0
        j = int(np.argmax(corr))
        if corr[j] <= 1e-12 * math.sqrt(max(y_norm2, 1e-300)):
            break
        trial = selected + [j]
        XS = Xn[:, trial]
        # reject an atom that is numerically dependent on those already chosen
        if np.linalg.matrix_rank(XS) < len(trial):
            break
        selected = trial
        coef_n = linalg.lstsq(XS, c.y)[0]
        residual = c.y - XS @ coef_n
        if residual @ residual <= 1e-24 * max(y_norm2, 1e-300):
            break
    coef = np.zeros(p)
    if selected:
        coef[selected] = coef_n / norms[selected]
    return _to_model(c, coef, "omp", {"selected": selected, "n_atoms": len(selected),
                                      "converged": True})


def _fit_bayesian_ridge(X, y, hp):
    c = _center(X, y, scale=False)
    Xc, yc = c.X, c.y
    n, p = Xc.shape
    eps = np.finfo(np.float64).eps
    alpha = 1.0 / (np.var(yc) + eps)
    lam = 1.0
    XTy = Xc.T @ yc
    U, S, Vh = linalg.svd(Xc, full_matrices=False)
    eig = S**2

    def update(alpha, lam):
        if n > p:
            coef = Vh.T @ ((Vh @ XTy) / (eig + lam / alpha))
        else:
            coef = Xc.T @ (U @ ((U.T @ yc) / (eig + lam / alpha)))
        resid = yc - Xc @ coef
        return coef, float(resid @ resid)

    coef_old = None
    converged = False
    it = 0
    for it in range(int(hp["n_iter"])):
        coef, rss = update(alpha, lam)
        gamma = float(np.sum(alpha * eig / (lam + alpha * eig)))
        lam = (gamma + 2 * hp["lambda_1"]) / (float(coef @ coef) + 2 * hp["lambda_2"])
        alpha = (n - gamma + 2 * hp["alpha_1"]) / (rss + 2 * hp["alpha_2"])
        if coef_old is not None and np.sum(np.abs(coef_old - coef)) < hp["tol"]:
            converged = True
            break
        coef_old = coef
    coef, _ = update(alpha, lam)
    return _to_model(c, coef, "bayesian_ridge",
                     {"iterations": it + 1, "converged": converged,
                      "noise_precision": float(alpha), "weight_precision": float(lam)})


def _ard_posterior(X, y, alpha, lam, keep):
    """Posterior covariance diagonal and mean over the kept weights."""
    n = X.shape[0]
    Xk = X[:, keep]
    lam_k = lam[keep]
    v = Xk.T @ y
    if Xk.shape[1] <= n:
        A = alpha * (Xk.T @ Xk)
        A[np.diag_indices_from(A)] += lam_k
        sigma = linalg.pinvh(A)
        return np.diag(sigma).copy(), alpha * (sigma @ v)
    lam_inv = 1.0 / lam_k
    XL = Xk * lam_inv
    B = linalg.pinvh(np.eye(n) / alpha + XL @ Xk.T)
    diag = lam_inv - np.sum(XL * (B @ XL), axis=0)
    mean = alpha * (lam_inv * v - XL.T @ (B @ (XL @ v)))
    return diag, mean


def _fit_ard(X, y, hp):
    c = _center(X, y, scale=False)
    Xc, yc = c.X, c.y
    n, p = Xc.shape
    eps = np.finfo(np.float64).eps
    coef = np.zeros(p)
    alpha = 1.0 / (np.var(yc) + eps)
    lam = np.ones(p)
    keep = np.ones(p, bool)
    coef_old = None
    converged = False
    it = 0
    for it in range(int(hp["n_iter"])):
        sigma_diag, mean = _ard_posterior(Xc, yc, alpha, lam, keep)
        coef = np.zeros(p)
        coef[keep] = mean
        resid = yc - Xc @ coef
        rss = float(resid @ resid)
        gamma = 1.0 - lam[keep] * sigma_diag
        lam[keep] = (gamma + 2 * hp["lambda_1"]) / (coef[keep] ** 2 + 2 * hp["lambda_2"])
        alpha = (n - gamma.sum() + 2 * hp["alpha_1"]) / (rss + 2 * hp["alpha_2"])
        keep = lam < hp["threshold_lambda"]
        coef[~keep] = 0.0
        if coef_old is not None and np.sum(np.abs(coef_old - coef)) < hp["tol"]:
            converged = True
            break
        coef_old = coef.copy()
        if not keep.any():
            break
    if keep.any():
        _, mean = _ard_posterior(Xc, yc, alpha, lam, keep)
        coef = np.zeros(p)
        coef[keep] = mean
    else:
        coef = np.zeros(p)
    return _to_model(c, coef, "ard", {"iterations": it + 1, "converged": converged,
                                      "noise_precision": float(alpha),
                                      "weight_precisions": lam.copy(),
                                      "n_kept": int(keep.sum())})


@njit(cache=True)
def _pa_fit(X, y, C, eps, max_iter, tol, n_no_change, state):
    n, p = X.shape
    w = np.zeros(p)
    b = 0.0
    order = np.arange(n)
    best = np.inf
    no_improve = 0
    sq = np.zeros(n)
    for i in range(n):
        s = 0.0
        for j in range(p):
            s += X[i, j] * X[i, j]
        sq[i] = s
    for epoch in range(max_iter):
        for k in range(n - 1, 0, -1):
            # splitmix64 draw for the Fisher-Yates shuffle
            state[0] += np.uint64(0x9E3779B97F4A7C15)
            z = state[0]
            z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
            z = z ^ (z >> np.uint64(31))
            j = int(z % np.uint64(k + 1))
            t = order[k]
            order[k] = order[j]
            order[j] = t
        total = 0.0
        for q in range(n):
            i = order[q]
            pred = b
            for j in range(p):
                pred += X[i, j] * w[j]
            r = y[i] - pred
            loss = abs(r) - eps
            if loss <= 0.0:
                continue
            total += loss
            if sq[i] == 0.0:
                continue
            step = min(C, loss / sq[i])
            if r < 0:
                step = -step
            for j in range(p):
                w[j] += step * X[i, j]
            b += step
        if not np.isfinite(total):
            return w, b, epoch + 1, False
        if total > best - tol * n:
            no_improve += 1
        else:
            no_improve = 0
        if total < best:
            best = total
        if no_improve >= n_no_change:
            return w, b, epoch + 1, True
    return w, b, max_iter, False


def _huber_objective(params, X, y, epsilon, alpha):
    n, p = X.shape
    w = params[:p]
    b = params[p]
    sigma = params[p + 1]
    r = y - X @ w - b
    out = np.abs(r) > epsilon * sigma
    r_in = r[~out]
    r_out = r[out]
    n_out = int(out.sum())
    loss = (n * sigma + float(r_in @ r_in) / sigma
            + 2 * epsilon * float(np.abs(r_out).sum()) - sigma * n_out * epsilon**2
            + alpha * float(w @ w))
    sgn = np.sign(r_out)
    grad = np.empty(p + 2)
    grad[:p] = (-2.0 / sigma) * (X[~out].T @ r_in) - 2 * epsilon * (X[out].T @ sgn) + 2 * alpha * w
    grad[p] = (-2.0 / sigma) * r_in.sum() - 2 * epsilon * sgn.sum()
    grad[p + 1] = n - float(r_in @ r_in) / sigma**2 - n_out * epsilon**2
    return loss, grad


def _fit_huber(X, y, hp):
    n, p = X.shape
    x0 = np.zeros(p + 2)
    x0[-1] = 1.0
    bounds = [(None, None)] * (p + 1) + [(np.finfo(np.float64).eps * 10, None)]
    res = optimize.minimize(_huber_objective, x0, args=(X, y, hp["epsilon"], hp["alpha"]),
                            jac=True, method="L-BFGS-B", bounds=bounds,
                            options={"maxiter": int(hp["max_iter"]), "gtol": hp["tol"]})
    coef = res.x[:p].copy()
    coef[np.ptp(X, axis=0) == 0] = 0.0
    return LinearModel(coef, float(res.x[p]), "huber",
                       {"iterations": int(res.nit), "converged": bool(res.success),
                        "scale": float(res.x[p + 1])})


def spatial_median(points: np.ndarray, max_iter: int = 300, tol: float = 1e-7):
    """Geometric median by the modified Weiszfeld iteration."""
    if points.shape[1] == 1:
        return np.array([np.median(points[:, 0])]), 0, True
    tiny = 1e-12
    m = points.mean(axis=0)
    for it in range(max_iter):
        diff = points - m
        dist = np.sqrt(np.sum(diff**2, axis=1))
        mask = dist >= tiny
        at_point = int(mask.sum() < len(points))
        inv = 1.0 / dist[mask]
        q_norm = np.linalg.norm(np.sum(diff[mask] * inv[:, None], axis=0))
        if q_norm > tiny:
            direction = np.sum(points[mask] * inv[:, None], axis=0) / inv.sum()
        else:
            direction, q_norm = m, 1.0
        nxt = (max(0.0, 1.0 - at_point / q_norm) * direction
               + min(1.0, at_point / q_norm) * m)
        if np.sum((nxt - m) ** 2) < tol**2:
            return nxt, it + 1, True
        m = nxt
    return m, max_iter, False


def pairwise_slope_median(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Univariate Theil-Sen: median pairwise slope, median-residual intercept."""
    i, j = np.triu_indices(len(x), k=1)
    dx = x[j] - x[i]
    ok = dx != 0
    if not ok.any():
        return 0.0, float(np.median(y))
    slope = float(np.median((y[j] - y[i])[ok] / dx[ok]))
    return slope, float(np.median(y - slope * x))


def _fit_theil_sen(X, y, hp, seed):
    n, p = X.shape
    if p == 1:
        slope, intercept = pairwise_slope_median(X[:, 0], y)
        return LinearModel(np.array([slope]), intercept, "theil_sen",
                           {"converged": True, "n_subpopulation": n * (n - 1) // 2})
    k = hp["n_subsamples"] or min(p + 1, n)
    total = comb(n, k, exact=False)
    Xi = np.hstack([np.ones((n, 1)), X])
    if total <= hp["max_subpopulation"]:
        subsets = np.array(list(itertools.combinations(range(n), k)))
    else:
        rng = np.random.default_rng(seed)
        m = int(hp["max_subpopulation"])
        subsets = np.argsort(rng.random((m, n)), axis=1)[:, :k]
    A = Xi[subsets]
    b = y[subsets]
    sols = None
    if k == p + 1:
        # square subset systems: batched LU, unless some subset is exactly singular
        try:
            sols = np.linalg.solve(A, b[..., None])[..., 0]
        except np.linalg.LinAlgError:
            sols = None
    if sols is None:
        sols = np.einsum("mij,mj->mi", np.linalg.pinv(A), b)
    med, iters, ok = spatial_median(sols, int(hp["spatial_max_iter"]), hp["spatial_tol"])
    coef = med[1:].copy()
    coef[np.ptp(X, axis=0) == 0] = 0.0
    return LinearModel(coef, float(med[0]), "theil_sen",
                       {"iterations": iters, "converged": ok,
                        "n_subpopulation": len(subsets)})


# ------------------------------------------------------------------ entry point

def _check_inputs(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise ValueError(f"shape mismatch: features {X.shape}, target {y.shape}")
    if X.shape[0] < 2:
        raise ValueError("need at least 2 samples")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite values in input")
    return X, y


def fit_linear(spec: LinearSpec, features, target) -> LinearModel:
    X, y = _check_inputs(features, target)
    hp = spec.params
    v = spec.variant
    n, p = X.shape
    if v == "ols":
        c = _center(X, y, scale=False)
        return _to_model(c, linalg.lstsq(c.X, c.y)[0], v, {"converged": True})
    if v == "ridge":
        c = _center(X, y, scale=False)
        return _to_model(c, ridge_solve(c.X, c.y, hp["alpha"]), v, {"converged": True})
    if v == "lasso":
        return _fit_enet(X, y, hp["alpha"], 1.0, hp["tol"], hp["max_iter"],
                         hp["standardize"], v)
    if v == "elastic_net":
        return _fit_enet(X, y, hp["alpha"], hp["l1_ratio"], hp["tol"], hp["max_iter"],
                         hp["standardize"], v)
    if v == "lasso_lars":
        c = _center(X, y, hp["standardize"])
        w, it, ok = lars_lasso_path_point(c.X, c.y, hp["alpha"], int(hp["max_iter"]))
        return _to_model(c, w, v, {"iterations": it, "converged": ok})
    if v == "omp":
        budget = hp["n_nonzero_coefs"] or max(1, math.ceil(hp["fraction"] * p))
        return _fit_omp(X, y, int(budget))
    if v == "bayesian_ridge":
        return _fit_bayesian_ridge(X, y, hp)
    if v == "ard":
        return _fit_ard(X, y, hp)
    if v == "passive_aggressive":
        state = np.array([np.uint64(spec.seed & (2**64 - 1))], dtype=np.uint64)
        w, b, it, ok = _pa_fit(np.ascontiguousarray(X), np.ascontiguousarray(y),
                               float(hp["C"]), float(hp["epsilon"]), int(hp["max_iter"]),
                               float(hp["tol"]), int(hp["n_iter_no_change"]), state)
        if not (np.all(np.isfinite(w)) and np.isfinite(b)):
            raise FloatingPointError("passive-aggressive updates diverged")
        return LinearModel(w, float(b), v, {"iterations": it, "converged": ok})
    if v == "huber":
        return _fit_huber(X, y, hp)
    return _fit_theil_sen(X, y, hp, spec.seed)
