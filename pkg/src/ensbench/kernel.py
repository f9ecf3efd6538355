"""Kernel ridge regression and epsilon-insensitive SVR (SMO dual solver)."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy import linalg


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "linear"
    gamma: float | None = None
    degree: int = 3
    coef0: float = 0.0

    def __post_init__(self):
        if self.kind not in ("linear", "rbf", "polynomial"):
            raise ValueError(f"unknown kernel {self.kind!r}")
        if self.gamma is not None and not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.degree < 1:
            raise ValueError("degree must be >= 1")

    def resolved(self, X: np.ndarray) -> "KernelSpec":
        """Fix gamma with the 'scale' convention, 1 / (n_features * var(X))."""
        if self.kind == "linear" or self.gamma is not None:
            return self
        var = float(np.var(X))
        gamma = 1.0 / (X.shape[1] * var) if var > 0 else 1.0
        return KernelSpec(self.kind, gamma, self.degree, self.coef0)


def gram(kernel: KernelSpec, A, B=None) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    B = A if B is None else np.asarray(B, dtype=np.float64)
    dot = A @ B.T
    if kernel.kind == "linear":
        return dot
    gamma = kernel.gamma if kernel.gamma is not None else 1.0 / A.shape[1]
    if kernel.kind == "polynomial":
        return (gamma * dot + kernel.coef0) ** kernel.degree
    sq = np.sum(A**2, axis=1)[:, None] + np.sum(B**2, axis=1)[None, :] - 2.0 * dot
    np.maximum(sq, 0.0, out=sq)
    K = np.exp(-gamma * sq)
    if B is A:
        # exact symmetry despite rounding in the distance expansion
        K = 0.5 * (K + K.T)
    return K


@dataclass(frozen=True, eq=False)
class KernelModel:
    dual_coefficients: np.ndarray
    support_rows: np.ndarray
    intercept: float
    kernel: KernelSpec
    variant: str
    diagnostics: dict = field(default_factory=dict)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.support_rows.shape[1]:
            raise ValueError(f"expected {self.support_rows.shape[1]} features, got {X.shape}")
        if len(self.dual_coefficients) == 0:
            return np.full(X.shape[0], self.intercept)
        return gram(self.kernel, X, self.support_rows) @ self.dual_coefficients + self.intercept


def fit_kernel_ridge(penalty: float, kernel: KernelSpec, features, target) -> KernelModel:
    """Solve (K + penalty I) a = y; no intercept term, as in plain kernel ridge."""
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(target, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != len(y):
        raise ValueError("features and target disagree in length")
    if penalty < 0:
        raise ValueError("penalty must be >= 0")
    kernel = kernel.resolved(X)
    K = gram(kernel, X)
    K[np.diag_indices_from(K)] += penalty
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", linalg.LinAlgWarning)
            a = linalg.solve(K, y, assume_a="pos")
    except (linalg.LinAlgError, linalg.LinAlgWarning, ValueError) as exc:
        raise linalg.LinAlgError(f"kernel ridge Gram solve failed: {exc}") from exc
    if not np.all(np.isfinite(a)):
        raise linalg.LinAlgError("kernel ridge Gram solve produced non-finite coefficients")
    return KernelModel(a, X.copy(), 0.0, kernel, "kernel_ridge")


@njit(cache=True)
def _smo(K, y, C, eps, tol, max_iter):
    n = K.shape[0]
    m = 2 * n
    sgn = np.empty(m)
    p = np.empty(m)
    for i in range(n):
        sgn[i] = 1.0
        sgn[i + n] = -1.0
        p[i] = eps - y[i]
        p[i + n] = eps + y[i]
    a = np.zeros(m)
    G = p.copy()
    it = 0
    converged = False
    while it < max_iter:
        # maximal violating pair
        g_max = -np.inf
        g_min = np.inf
        i = -1
        j = -1
        for t in range(m):
            v = -sgn[t] * G[t]
            up = (sgn[t] > 0 and a[t] < C) or (sgn[t] < 0 and a[t] > 0)
            low = (sgn[t] > 0 and a[t] > 0) or (sgn[t] < 0 and a[t] < C)
            if up and v > g_max:
                g_max = v
                i = t
            if low and v < g_min:
                g_min = v
                j = t
        if i < 0 or j < 0 or g_max - g_min < tol:
            converged = True
            break
        it += 1
        ki = i % n
        kj = j % n
        Qij = sgn[i] * sgn[j] * K[ki, kj]
        Qii = K[ki, ki]
        Qjj = K[kj, kj]
        old_i = a[i]
        old_j = a[j]
        if sgn[i] != sgn[j]:
            quad = Qii + Qjj + 2.0 * Qij
            if quad <= 0:
                quad = 1e-12
            delta = (-G[i] - G[j]) / quad
            diff = a[i] - a[j]
            a[i] += delta
            a[j] += delta
            if diff > 0:
                if a[j] < 0:
                    a[j] = 0.0
                    a[i] = diff
            else:
                if a[i] < 0:
                    a[i] = 0.0
                    a[j] = -diff
            if diff > 0:
                if a[i] > C:
                    a[i] = C
                    a[j] = C - diff
            else:
                if a[j] > C:
                    a[j] = C
                    a[i] = C + diff
        else:
            quad = Qii + Qjj - 2.0 * Qij
            if quad <= 0:
                quad = 1e-12
            delta = (G[i] - G[j]) / quad
            s = a[i] + a[j]
            a[i] -= delta
            a[j] += delta
            if s > C:
                if a[i] > C:
                    a[i] = C
                    a[j] = s - C
            else:
                if a[j] < 0:
                    a[j] = 0.0
                    a[i] = s
            if s > C:
                if a[j] > C:
                    a[j] = C
                    a[i] = s - C
            else:
                if a[i] < 0:
                    a[i] = 0.0
                    a[j] = s
        di = a[i] - old_i
        dj = a[j] - old_j
        for t in range(m):
            kt = t % n
            G[t] += sgn[t] * (sgn[i] * K[kt, ki] * di + sgn[j] * K[kt, kj] * dj)

    # intercept from free variables, else midpoint of the feasible interval
    ub = np.inf
    lb = -np.inf
    s_free = 0.0
    n_free = 0
    for t in range(m):
        yg = sgn[t] * G[t]
        if a[t] >= C:
            if sgn[t] < 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        elif a[t] <= 0:
            if sgn[t] > 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        else:
            n_free += 1
            s_free += yg
    rho = s_free / n_free if n_free > 0 else 0.5 * (ub + lb)
    return a[:n].copy(), a[n:].copy(), -rho, it, converged


def svr_dual_objective(K, y, alpha, alpha_star, epsilon) -> float:
    """Minimisation form of the epsilon-SVR dual."""
    beta = alpha - alpha_star
    return float(0.5 * beta @ K @ beta + epsilon * np.sum(alpha + alpha_star) - y @ beta)


def fit_svr(C: float, epsilon: float, kernel: KernelSpec, features, target,
            tol: float = 1e-3, max_iter: int | None = None) -> KernelModel:
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(target, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != len(y):
        raise ValueError("features and target disagree in length")
    if not C > 0 or epsilon < 0:
        raise ValueError("need C > 0 and epsilon >= 0")
    n = len(y)
    kernel = kernel.resolved(X)
    K = np.ascontiguousarray(gram(kernel, X))
    cap = 100 * n if max_iter is None else max_iter
    a, a_star, b, it, ok = _smo(K, np.ascontiguousarray(y), float(C), float(epsilon),
                                float(tol), int(cap))
    beta = a - a_star
    support = np.flatnonzero(beta != 0)
    diag = {"iterations": int(it), "converged": bool(ok), "alpha": a, "alpha_star": a_star,
            "objective": svr_dual_objective(K, y, a, a_star, epsilon)}
    return KernelModel(beta[support], X[support].copy(), float(b), kernel, "svr", diag)
