"""CART regression trees and the tree ensembles built on them.

The split search runs on presorted per-feature index arrays: every node owns a
contiguous slice ``order[:, start:end]`` and children are produced by a stable
partition of that slice, so each level costs O(n_features * n_node_rows).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

_IMPURITY_EPS = float(np.finfo(np.float64).eps)
# random splitter: a feature whose node range is below this is treated as constant
_FEATURE_THRESHOLD = 1e-7


def derive_seed(*entropy: int) -> int:
    """Collapse a tuple of integers into one 63-bit seed."""
    ss = np.random.SeedSequence([int(e) for e in entropy])
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


@njit(cache=True)
def _next_u64(state):
    # splitmix64
    state[0] += np.uint64(0x9E3779B97F4A7C15)
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def _uniform(state):
    return float(_next_u64(state) >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True)
def _build(X, y, w, order, max_depth, min_split, min_leaf, max_features,
           random_split, rng_state):
    n_rows_total, p = X.shape
    n_order = order.shape[0]
    m_root = order.shape[1]
    cap = 2 * m_root + 1

    feat = np.full(cap, -1, np.int64)
    thr = np.zeros(cap)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    value = np.zeros(cap)
    impurity = np.zeros(cap)
    wnode = np.zeros(cap)
    nsamp = np.zeros(cap, np.int64)

    st_node = np.empty(cap, np.int64)
    st_start = np.empty(cap, np.int64)
    st_end = np.empty(cap, np.int64)
    st_depth = np.empty(cap, np.int64)

    goes_left = np.zeros(n_rows_total, np.bool_)
    buf = np.empty(m_root, np.int64)
    feats = np.arange(p)

    sp = 0
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = m_root
    st_depth[0] = 0
    sp = 1
    n_nodes = 1
    max_seen_depth = 0

    while sp > 0:
        sp -= 1
        node = st_node[sp]
        start = st_start[sp]
        end = st_end[sp]
        depth = st_depth[sp]
        m = end - start
        if depth > max_seen_depth:
            max_seen_depth = depth

        W = 0.0
        S = 0.0
        for q in range(start, end):
            i = order[0, q]
            W += w[i]
            S += w[i] * y[i]
        mean = S / W
        y0 = y[order[0, start]]
        all_same = True
        sse = 0.0
        s_c = 0.0
        for q in range(start, end):
            i = order[0, q]
            d = y[i] - mean
            sse += w[i] * d * d
            s_c += w[i] * d
            if y[i] != y0:
                all_same = False
        value[node] = y0 if all_same else mean
        impurity[node] = 0.0 if all_same else sse / W
        wnode[node] = W
        nsamp[node] = m

        if all_same or impurity[node] <= _IMPURITY_EPS:
            continue
        if max_depth >= 0 and depth >= max_depth:
            continue
        if m < min_split or m < 2 * min_leaf:
            continue

        base = s_c * s_c / W
        best_gain = -np.inf
        best_f = -1
        best_thr = 0.0
        visited = 0
        for k in range(p):
            if max_features < p:
                if visited >= max_features:
                    break
                j = k + int(_uniform(rng_state) * (p - k))
                if j >= p:
                    j = p - 1
                tmp = feats[k]
                feats[k] = feats[j]
                feats[j] = tmp
            f = feats[k]
            if not random_split:
                lo = X[order[f, start], f]
                hi = X[order[f, end - 1], f]
                if hi <= lo:
                    continue
                visited += 1
                wl = 0.0
                sl = 0.0
                nl = 0
                for q in range(start, end - 1):
                    i = order[f, q]
                    wl += w[i]
                    sl += w[i] * (y[i] - mean)
                    nl += 1
                    xa = X[i, f]
                    xb = X[order[f, q + 1], f]
                    if xb <= xa:
                        continue
                    if nl < min_leaf or m - nl < min_leaf:
                        continue
                    wr = W - wl
                    sr = s_c - sl
                    gain = sl * sl / wl + sr * sr / wr - base
                    if gain > best_gain or (gain == best_gain and f < best_f):
                        best_gain = gain
                        best_f = f
                        t = 0.5 * (xa + xb)
                        if t >= xb:
                            t = xa
                        best_thr = t
            else:
                lo = np.inf
                hi = -np.inf
                for q in range(start, end):
                    v = X[order[0, q], f]
                    if v < lo:
                        lo = v
                    if v > hi:
                        hi = v
                if hi <= lo + _FEATURE_THRESHOLD:
                    continue
                visited += 1
                t = lo + _uniform(rng_state) * (hi - lo)
                if t >= hi:
                    t = lo
                wl = 0.0
                sl = 0.0
                nl = 0
                for q in range(start, end):
                    i = order[0, q]
                    if X[i, f] <= t:
                        wl += w[i]
                        sl += w[i] * (y[i] - mean)
                        nl += 1
                if nl < min_leaf or m - nl < min_leaf:
                    continue
                wr = W - wl
                sr = s_c - sl
                gain = sl * sl / wl + sr * sr / wr - base
                if gain > best_gain or (gain == best_gain and f < best_f):
                    best_gain = gain
                    best_f = f
                    best_thr = t

        if best_f < 0:
            continue

        nl = 0
        for q in range(start, end):
            i = order[0, q]
            gl = X[i, best_f] <= best_thr
            goes_left[i] = gl
            if gl:
                nl += 1
        for f in range(n_order):
            a = start
            b = 0
            for q in range(start, end):
                i = order[f, q]
                if goes_left[i]:
                    order[f, a] = i
                    a += 1
                else:
                    buf[b] = i
                    b += 1
            for q in range(b):
                order[f, a + q] = buf[q]

        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        feat[node] = best_f
        thr[node] = best_thr
        left[node] = lid
        right[node] = rid

        st_node[sp] = rid
        st_start[sp] = start + nl
        st_end[sp] = end
        st_depth[sp] = depth + 1
        sp += 1
        st_node[sp] = lid
        st_start[sp] = start
        st_end[sp] = start + nl
        st_depth[sp] = depth + 1
        sp += 1

    return (feat[:n_nodes], thr[:n_nodes], left[:n_nodes], right[:n_nodes],
            value[:n_nodes], impurity[:n_nodes], wnode[:n_nodes],
            nsamp[:n_nodes], max_seen_depth)


@njit(cache=True)
def _apply(X, feat, thr, left, right, value):
    n = X.shape[0]
    out = np.empty(n)
    for r in range(n):
        node = 0
        while feat[node] >= 0:
            if X[r, feat[node]] <= thr[node]:
                node = left[node]
            else:
                node = right[node]
        out[r] = value[node]
    return out


@dataclass(frozen=True)
class TreeSpec:
    max_depth: int | None = None
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    feature_subset: str | float = "all"
    splitter: str = "best"
    seed: int = 0

    def __post_init__(self):
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be a positive integer or None")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.splitter not in ("best", "random"):
            raise ValueError(f"unknown splitter {self.splitter!r}")
        if isinstance(self.feature_subset, str):
            if self.feature_subset not in ("all", "sqrt"):
                raise ValueError(f"unknown feature_subset {self.feature_subset!r}")
        elif not 0.0 < float(self.feature_subset) <= 1.0:
            raise ValueError("feature_subset fraction must lie in (0, 1]")

    def n_candidates(self, n_features: int) -> int:
        if self.feature_subset == "all":
            return n_features
        if self.feature_subset == "sqrt":
            return max(1, int(math.sqrt(n_features)))
        return max(1, int(float(self.feature_subset) * n_features))


@dataclass(frozen=True, eq=False)
class TreeModel:
    """Array-encoded binary tree; ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    impurity: np.ndarray
    weighted_n: np.ndarray
    n_samples: np.ndarray
    depth: int
    n_features: int

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    def predict(self, X) -> np.ndarray:
        X = _as_matrix(X, self.n_features)
        return _apply(X, self.feature, self.threshold, self.left, self.right, self.value)

    def feature_importances(self) -> np.ndarray:
        """Weighted impurity decrease per feature, normalised to sum to one."""
        imp = np.zeros(self.n_features)
        for node in np.flatnonzero(self.feature >= 0):
            lo, hi = self.left[node], self.right[node]
            imp[self.feature[node]] += (
                self.weighted_n[node] * self.impurity[node]
                - self.weighted_n[lo] * self.impurity[lo]
                - self.weighted_n[hi] * self.impurity[hi]
            )
        imp /= self.weighted_n[0]
        np.maximum(imp, 0.0, out=imp)
        total = imp.sum()
        return imp / total if total > 0 else imp


def _as_matrix(X, n_features: int | None = None) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D feature matrix, got shape {X.shape}")
    if n_features is not None and X.shape[1] != n_features:
        raise ValueError(f"model was fitted on {n_features} features, got {X.shape[1]}")
    return X


def presort(X: np.ndarray) -> np.ndarray:
    """Per-feature row order, shape (n_features, n_samples)."""
    return np.argsort(np.ascontiguousarray(X.T), axis=1, kind="stable")


def _fit_tree(spec: TreeSpec, X, y, w, sorted_order=None) -> TreeModel:
    n, p = X.shape
    rows = np.flatnonzero(w > 0)
    if spec.splitter == "random":
        order = rows[None, :].astype(np.int64)
    elif sorted_order is None:
        order = presort(X)
        if len(rows) < n:
            keep = w[order] > 0
            order = order[keep].reshape(p, len(rows))
    else:
        keep = w[sorted_order] > 0
        order = sorted_order[keep].reshape(p, len(rows))
    order = np.ascontiguousarray(order, dtype=np.int64)
    rng_state = np.array([np.uint64(derive_seed(spec.seed))], dtype=np.uint64)
    out = _build(
        X, y, w, order,
        -1 if spec.max_depth is None else int(spec.max_depth),
        int(spec.min_samples_split), int(spec.min_samples_leaf),
        int(spec.n_candidates(p)), spec.splitter == "random", rng_state,
    )
    feat, thr, lo, hi, val, imp, wn, ns, depth = out
    return TreeModel(feat, thr, lo, hi, val, imp, wn, ns, int(depth), p)


def fit_tree(spec: TreeSpec, features, target, sample_weights=None) -> TreeModel:
    """Greedy top-down CART with weighted variance reduction."""
    X = _as_matrix(features)
    y = np.ascontiguousarray(target, dtype=np.float64)
    if X.shape[0] == 0:
        raise ValueError("cannot fit a tree on zero samples")
    if y.shape != (X.shape[0],):
        raise ValueError("target length does not match feature rows")
    if sample_weights is None:
        w = np.ones(X.shape[0])
    else:
        w = np.ascontiguousarray(sample_weights, dtype=np.float64)
        if w.shape != y.shape or np.any(w < 0) or not w.sum() > 0:
            raise ValueError("sample weights must be nonnegative with positive sum")
    return _fit_tree(spec, X, y, w)


# --------------------------------------------------------------------- ensembles

ENSEMBLE_KINDS = ("random_forest", "extra_trees", "gradient_boosting", "adaboost_default")


@dataclass(frozen=True)
class TreeEnsembleSpec:
    kind: str = "random_forest"
    n_estimators: int = 100
    learning_rate: float = 0.1
    base_tree: TreeSpec = field(default_factory=TreeSpec)
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ENSEMBLE_KINDS:
            raise ValueError(f"unknown tree ensemble kind {self.kind!r}")
        # zero stages is a valid (mean-only) gradient boosting model
        floor = 0 if self.kind == "gradient_boosting" else 1
        if self.n_estimators < floor:
            raise ValueError("n_estimators too small")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")


def default_ensemble_spec(kind: str, seed: int = 0) -> TreeEnsembleSpec:
    if kind == "random_forest":
        return TreeEnsembleSpec(kind, 100, 0.1, TreeSpec(), True, seed)
    if kind == "extra_trees":
        return TreeEnsembleSpec(kind, 100, 0.1, TreeSpec(splitter="random"), False, seed)
    if kind == "gradient_boosting":
        return TreeEnsembleSpec(kind, 100, 0.1, TreeSpec(max_depth=3), False, seed)
    if kind == "adaboost_default":
        return TreeEnsembleSpec(kind, 50, 1.0, TreeSpec(max_depth=3), False, seed)
    raise ValueError(f"unknown tree ensemble kind {kind!r}")


@dataclass(frozen=True, eq=False)
class ForestModel:
    trees: tuple[TreeModel, ...]
    kind: str

    def member_predictions(self, X) -> np.ndarray:
        X = _as_matrix(X, self.trees[0].n_features)
        return np.stack([t.predict(X) for t in self.trees])

    def predict(self, X) -> np.ndarray:
        return self.member_predictions(X).mean(axis=0)

    def feature_importances(self) -> np.ndarray:
        imp = np.mean([t.feature_importances() for t in self.trees], axis=0)
        total = imp.sum()
        return imp / total if total > 0 else imp


@dataclass(frozen=True, eq=False)
class BoostedTreesModel:
    init: float
    learning_rate: float
    trees: tuple[TreeModel, ...]
    n_features: int
    train_loss: tuple[float, ...] = ()

    def staged_predict(self, X):
        X = _as_matrix(X, self.n_features)
        f = np.full(X.shape[0], self.init)
        yield f.copy()
        for t in self.trees:
            f += self.learning_rate * t.predict(X)
            yield f.copy()

    def predict(self, X) -> np.ndarray:
        X = _as_matrix(X, self.n_features)
        f = np.full(X.shape[0], self.init)
        for t in self.trees:
            f += self.learning_rate * t.predict(X)
        return f


def _fit_forest(spec: TreeEnsembleSpec, X, y) -> ForestModel:
    n = X.shape[0]
    order = presort(X) if spec.base_tree.splitter == "best" else None
    trees = []
    for t in range(spec.n_estimators):
        rng = np.random.default_rng(np.random.SeedSequence([spec.seed, t]))
        if spec.bootstrap:
            w = np.bincount(rng.integers(0, n, n), minlength=n).astype(np.float64)
        else:
            w = np.ones(n)
        tree_spec = replace(spec.base_tree, seed=int(rng.integers(2**62)))
        trees.append(_fit_tree(tree_spec, X, y, w, order))
    return ForestModel(tuple(trees), spec.kind)


def _fit_gradient_boosting(spec: TreeEnsembleSpec, X, y) -> BoostedTreesModel:
    n = X.shape[0]
    order = presort(X) if spec.base_tree.splitter == "best" else None
    init = float(np.mean(y))
    f = np.full(n, init)
    w = np.ones(n)
    losses = [float(np.mean((y - f) ** 2))]
    trees = []
    for t in range(spec.n_estimators):
        tree_spec = replace(spec.base_tree, seed=derive_seed(spec.seed, t))
        tree = _fit_tree(tree_spec, X, y - f, w, order)
        f = f + spec.learning_rate * tree.predict(X)
        trees.append(tree)
        losses.append(float(np.mean((y - f) ** 2)))
    return BoostedTreesModel(init, spec.learning_rate, tuple(trees), X.shape[1], tuple(losses))


def fit_tree_ensemble(spec: TreeEnsembleSpec, features, target):
    X = _as_matrix(features)
    y = np.ascontiguousarray(target, dtype=np.float64)
    if X.shape[0] == 0 or y.shape != (X.shape[0],):
        raise ValueError("features and target must be non-empty with matching rows")
    if spec.kind in ("random_forest", "extra_trees"):
        return _fit_forest(spec, X, y)
    if spec.kind == "gradient_boosting":
        return _fit_gradient_boosting(spec, X, y)

    from .ensemble import boost_r2

    base = spec.base_tree

    def fit_member(Xr, yr, seed):
        return _fit_tree(replace(base, seed=seed), Xr, yr, np.ones(len(yr)))

    # the stand-alone AdaBoost row follows the reference regressor: weighted median
    return boost_r2(fit_member, X, y, n_rounds=spec.n_estimators, loss_shape="linear",
                    seed=spec.seed, learning_rate=spec.learning_rate,
                    combination="median")
