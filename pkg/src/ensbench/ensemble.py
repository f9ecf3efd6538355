"""Bagging and additive regression (AdaBoost.R2) over arbitrary base regressors.

Both wrappers only need ``base.fit(X, y, seed) -> model`` with ``model.predict``,
so any registered regressor can be wrapped, including ones that cannot take
sample weights: boosting focuses on hard samples through weighted resampling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

MODE_KINDS = ("single", "bagging", "additive_regression")
LOSS_SHAPES = ("linear", "square", "exponential")

# member weight used when a round reaches zero average loss
_BETA_FLOOR = 1e-10


@dataclass(frozen=True)
class EnsembleMode:
    kind: str = "single"
    n_members: int = 10
    n_rounds: int = 10
    loss_shape: str = "linear"
    combination: str = "mean"
    resample: str = "bootstrap"
    seed: int = 0

    def __post_init__(self):
        if self.kind not in MODE_KINDS:
            raise ValueError(f"unknown ensemble mode {self.kind!r}")
        if self.n_members < 1 or self.n_rounds < 1:
            raise ValueError("n_members and n_rounds must be >= 1")
        if self.loss_shape not in LOSS_SHAPES:
            raise ValueError(f"unknown loss shape {self.loss_shape!r}")
        if self.combination not in ("mean", "median"):
            raise ValueError(f"unknown combination {self.combination!r}")
        if self.resample not in ("bootstrap", "identity"):
            raise ValueError(f"unknown resample hook {self.resample!r}")

    @property
    def prefix(self) -> str:
        return {"single": "", "bagging": "BG-", "additive_regression": "AR-"}[self.kind]


def weighted_median(preds: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Per-column weighted median of ``preds`` (members x samples)."""
    order = np.argsort(preds, axis=0, kind="stable")
    cum = np.cumsum(weights[order], axis=0)
    pick = np.argmax(cum >= 0.5 * cum[-1], axis=0)
    rows = order[pick, np.arange(preds.shape[1])]
    return preds[rows, np.arange(preds.shape[1])]


@dataclass(frozen=True, eq=False)
class EnsembleModel:
    members: tuple
    member_weights: np.ndarray
    mode: EnsembleMode
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.members:
            raise ValueError("an ensemble needs at least one member")
        if len(self.member_weights) != len(self.members):
            raise ValueError("one weight per member required")
        if not np.all(np.isfinite(self.member_weights)) or np.any(self.member_weights <= 0):
            raise ValueError("member weights must be finite and positive")

    def member_predictions(self, X) -> np.ndarray:
        return np.stack([np.asarray(m.predict(X), dtype=np.float64) for m in self.members])

    def predict(self, X) -> np.ndarray:
        return predict_ensemble(self, X)


def predict_ensemble(model: EnsembleModel, features) -> np.ndarray:
    preds = model.member_predictions(features)
    if len(preds) == 1:
        return preds[0]
    if model.mode.kind == "additive_regression":
        if model.mode.combination == "median":
            return weighted_median(preds, model.member_weights)
        w = model.member_weights
        return w @ preds / w.sum()
    return preds.mean(axis=0)


def _member_seeds(seed: int, index: int) -> tuple[int, int]:
    a, b = np.random.SeedSequence([seed, index]).generate_state(2, np.uint64)
    return int(a >> np.uint64(1)), int(b >> np.uint64(1))


def bootstrap_indices(n: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).integers(0, n, n)


def fit_bagging(base, mode: EnsembleMode, features, target) -> EnsembleModel:
    """Average of base models fitted on with-replacement resamples of size n."""
    if mode.kind != "bagging":
        raise ValueError("fit_bagging needs a bagging mode")
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(target, dtype=np.float64)
    n = len(y)
    members = []
    for i in range(mode.n_members):
        draw_seed, fit_seed = _member_seeds(mode.seed, i)
        idx = np.arange(n) if mode.resample == "identity" else bootstrap_indices(n, draw_seed)
        try:
            members.append(base.fit(X[idx], y[idx], fit_seed))
        except Exception as exc:
            raise RuntimeError(f"bagging member {i} failed: {exc}") from exc
    return EnsembleModel(tuple(members), np.ones(len(members)), mode)


@dataclass(frozen=True)
class BoostRound:
    accepted: bool
    average_loss: float
    beta: float
    member_weight: float
    sample_weights: np.ndarray
    stop: bool


def shape_losses(abs_errors: np.ndarray, loss_shape: str = "linear") -> np.ndarray:
    emax = float(np.max(abs_errors)) if len(abs_errors) else 0.0
    if emax <= 0.0:
        return np.zeros_like(abs_errors, dtype=np.float64)
    loss = abs_errors / emax
    if loss_shape == "square":
        loss = loss**2
    elif loss_shape == "exponential":
        loss = 1.0 - np.exp(-loss)
    return loss


def r2_round(sample_weights: np.ndarray, losses: np.ndarray,
             learning_rate: float = 1.0) -> BoostRound:
    """One AdaBoost.R2 weight update given per-sample normalised losses in [0, 1]."""
    w = np.asarray(sample_weights, dtype=np.float64)
    L = np.asarray(losses, dtype=np.float64)
    avg = float(np.sum(w * L))
    if avg <= 0.0:
        return BoostRound(True, 0.0, _BETA_FLOOR, learning_rate * math.log(1.0 / _BETA_FLOOR),
                          w.copy(), True)
    if avg >= 0.5:
        return BoostRound(False, avg, math.nan, 0.0, w.copy(), True)
    beta = avg / (1.0 - avg)
    new = w * np.power(beta, (1.0 - L) * learning_rate)
    new /= new.sum()
    return BoostRound(True, avg, beta, learning_rate * math.log(1.0 / beta), new, False)


def boost_r2(fit_member: Callable, features, target, n_rounds: int,
             loss_shape: str = "linear", seed: int = 0, learning_rate: float = 1.0,
             combination: str = "mean", mode: EnsembleMode | None = None) -> EnsembleModel:
    """AdaBoost.R2 with weighted bootstrap resampling.

    Rounds whose weighted average loss reaches 0.5 are discarded and end the
    loop. If that happens in the very first round the lone member is kept with
    unit weight so the model is still usable.
    """
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(target, dtype=np.float64)
    n = len(y)
    if mode is None:
        mode = EnsembleMode("additive_regression", n_rounds=n_rounds, loss_shape=loss_shape,
                            combination=combination, seed=seed)
    w = np.full(n, 1.0 / n)
    members: list = []
    weights: list[float] = []
    history = [w.copy()]
    average_losses: list[float] = []
    rejected = 0
    for t in range(n_rounds):
        draw_seed, fit_seed = _member_seeds(seed, t)
        rng = np.random.default_rng(draw_seed)
        if mode.resample == "identity":
            idx = np.arange(n)
        else:
            idx = rng.choice(n, size=n, replace=True, p=w)
        try:
            model = fit_member(X[idx], y[idx], fit_seed)
        except Exception as exc:
            raise RuntimeError(f"boosting round {t} failed: {exc}") from exc
        err = np.abs(np.asarray(model.predict(X), dtype=np.float64) - y)
        rnd = r2_round(w, shape_losses(err, loss_shape), learning_rate)
        average_losses.append(rnd.average_loss)
        if not rnd.accepted:
            rejected += 1
            if not members:
                members.append(model)
                weights.append(1.0)
            break
        members.append(model)
        weights.append(rnd.member_weight)
        w = rnd.sample_weights
        history.append(w.copy())
        if rnd.stop:
            break
    diag = {"sample_weight_history": history, "average_losses": average_losses,
            "rejected_rounds": rejected}
    return EnsembleModel(tuple(members), np.asarray(weights), mode, diag)


def fit_additive_regression(base, mode: EnsembleMode, features, target) -> EnsembleModel:
    if mode.kind != "additive_regression":
        raise ValueError("fit_additive_regression needs an additive_regression mode")
    return boost_r2(base.fit, features, target, mode.n_rounds, mode.loss_shape, mode.seed,
                    combination=mode.combination, mode=mode)


def fit_ensemble(base, mode: EnsembleMode, features, target):
    """Dispatch on ``mode.kind``; ``single`` fits the base once with ``mode.seed``."""
    if mode.kind == "bagging":
        return fit_bagging(base, mode, features, target)
    if mode.kind == "additive_regression":
        return fit_additive_regression(base, mode, features, target)
    return base.fit(np.asarray(features, dtype=np.float64),
                    np.asarray(target, dtype=np.float64), mode.seed)


def mean_unique_fraction(n: int, draws: int, seed: int) -> float:
    """Average fraction of distinct rows over seeded bootstrap draws."""
    fracs: Sequence[float] = [
        len(np.unique(bootstrap_indices(n, s))) / n
        for s in np.random.SeedSequence(seed).generate_state(draws, np.uint64)
    ]
    return float(np.mean(fracs))
