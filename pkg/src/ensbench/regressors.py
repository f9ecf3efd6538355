"""Registry of the 19 base regressors, in benchmark table order, with defaults."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Protocol

import numpy as np

from . import instance, kernel, linear, tree


class FittedRegressor(Protocol):
    def predict(self, X) -> np.ndarray: ...


# key -> display label; order is the benchmark row order
BASE_LABELS = {
    "lasso": "Lasso Regression",
    "ridge": "Ridge Regression",
    "elastic_net": "Elastic Net",
    "lasso_lars": "Lasso Least Angle Regression",
    "omp": "Orthogonal Matching Pursuit",
    "bayesian_ridge": "Bayesian Ridge",
    "ard": "Automatic Relevance Determination",
    "passive_aggressive": "Passive Aggressive Regressor",
    "theil_sen": "TheilSen Regressor",
    "huber": "Huber Regressor",
    "kernel_ridge": "Kernel Ridge",
    "svr": "Support Vector Machine",
    "knn": "K Neighbors Regressor",
    "decision_tree": "Decision Tree",
    "random_forest": "Random Forest",
    "extra_trees": "Extra Trees Regressor",
    "adaboost": "AdaBoost Regressor",
    "gradient_boosting": "Gradient Boosting Regressor",
    "mlp": "Multi Level Perceptron",
}
DEFAULT_BASES = tuple(BASE_LABELS)

# test hook: a base whose every fit raises
FAIL_HOOK = "fail"

_LINEAR_KEYS = {"lasso", "ridge", "elastic_net", "lasso_lars", "omp", "bayesian_ridge",
                "ard", "passive_aggressive", "huber", "theil_sen"}
_FOREST_KIND = {"random_forest": "random_forest", "extra_trees": "extra_trees",
                "gradient_boosting": "gradient_boosting", "adaboost": "adaboost_default"}


class ForcedFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class RegressorSpec:
    key: str
    params: dict = field(default_factory=dict)
    label: str = ""

    def __post_init__(self):
        if self.key not in BASE_LABELS and self.key != FAIL_HOOK:
            raise ValueError(f"unknown base regressor {self.key!r}")
        if not self.label:
            object.__setattr__(self, "label", BASE_LABELS.get(self.key, "Forced Failure"))

    def fit(self, X, y, seed: int = 0) -> FittedRegressor:
        return fit_regressor(self, X, y, seed)


def fit_regressor(spec: RegressorSpec, features, target, seed: int = 0) -> FittedRegressor:
    X = np.ascontiguousarray(features, dtype=np.float64)
    y = np.ascontiguousarray(target, dtype=np.float64)
    key, p = spec.key, dict(spec.params)
    if key == FAIL_HOOK:
        raise ForcedFailure("forced failure (test hook)")
    if key in _LINEAR_KEYS:
        return linear.fit_linear(linear.LinearSpec(key, p, seed), X, y)
    if key == "kernel_ridge":
        k = kernel.KernelSpec(**p.pop("kernel", {"kind": "linear"}))
        return kernel.fit_kernel_ridge(p.pop("alpha", 1.0), k, X, y)
    if key == "svr":
        k = kernel.KernelSpec(**p.pop("kernel", {"kind": "rbf"}))
        return kernel.fit_svr(p.pop("C", 1.0), p.pop("epsilon", 0.1), k, X, y, **p)
    if key == "knn":
        return instance.fit_knn(instance.KnnSpec(**p), X, y)
    if key == "mlp":
        return instance.fit_mlp(instance.MlpSpec(**{**p, "seed": seed}), X, y)
    if key == "decision_tree":
        return tree.fit_tree(tree.TreeSpec(**{**p, "seed": seed}), X, y)
    ens = tree.default_ensemble_spec(_FOREST_KIND[key], seed)
    if p:
        base_overrides = p.pop("base_tree", None)
        if base_overrides:
            p["base_tree"] = replace(ens.base_tree, **base_overrides)
        ens = replace(ens, **p)
    return tree.fit_tree_ensemble(ens, X, y)


def base_specs(keys=DEFAULT_BASES) -> list[RegressorSpec]:
    return [RegressorSpec(k) for k in keys]
