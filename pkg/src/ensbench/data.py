"""Descriptor-matrix datasets: CSV I/O, validation, synthetic stand-ins and
random-forest-importance feature selection."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .tree import TreeEnsembleSpec, default_ensemble_spec, fit_tree_ensemble

log = logging.getLogger(__name__)

# name -> (samples, original descriptors, selected features)
QSAR_SHAPES = {
    "polymer_133": (133, 836, 10),
    "alkaloid_53": (53, 2221, 10),
    "alkaloid_103": (103, 355, 10),
    "polymer_150": (150, 474, 10),
}


class DatasetError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Dataset:
    name: str
    features: np.ndarray
    target: np.ndarray
    feature_names: tuple[str, ...]
    provenance: str = "synthetic"

    def __post_init__(self):
        X = np.array(self.features, dtype=np.float64)
        y = np.array(self.target, dtype=np.float64)
        if X.ndim != 2:
            raise DatasetError(f"{self.name}: feature matrix must be 2-D")
        n, p = X.shape
        if n < 2 or p < 1:
            raise DatasetError(f"{self.name}: need >= 2 samples and >= 1 feature, got {X.shape}")
        if y.shape != (n,):
            raise DatasetError(f"{self.name}: target length {y.shape} != {n} rows")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise DatasetError(f"{self.name}: non-finite entries")
        names = tuple(str(s) for s in self.feature_names)
        if len(names) != p:
            raise DatasetError(f"{self.name}: {len(names)} feature names for {p} columns")
        if len(set(names)) != p:
            raise DatasetError(f"{self.name}: feature names are not unique")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "target", y)
        object.__setattr__(self, "feature_names", names)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset_rows(self, rows) -> "Dataset":
        return Dataset(self.name, self.features[rows], self.target[rows],
                       self.feature_names, self.provenance)


def load_dataset(path, target_column: str, name: str | None = None) -> Dataset:
    """Read a header-first numeric CSV. Row numbers in errors are file line numbers."""
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"dataset file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        hits = [i for i, h in enumerate(header) if h == target_column]
        if not hits:
            raise DatasetError(f"{path}: target column not found: {target_column!r}")
        if len(hits) > 1:
            raise DatasetError(f"{path}: target column {target_column!r} appears {len(hits)} times")
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DatasetError(f"{path}: row {line_no} has {len(row)} cells, "
                                   f"header has {len(header)}")
            vals = []
            for col, cell in zip(header, row):
                try:
                    v = float(cell)
                except ValueError:
                    raise DatasetError(f"{path}: non-numeric cell {cell!r} at row {line_no}, "
                                       f"column {col!r}") from None
                if not math.isfinite(v):
                    raise DatasetError(f"{path}: non-finite cell at row {line_no}, column {col!r}")
                vals.append(v)
            rows.append(vals)
    if len(rows) < 2:
        raise DatasetError(f"{path}: need at least 2 data rows, found {len(rows)}")
    data = np.array(rows, dtype=np.float64)
    t = hits[0]
    keep = [i for i in range(len(header)) if i != t]
    return Dataset(name or path.stem, data[:, keep], data[:, t],
                   tuple(header[i] for i in keep), str(path))


def write_dataset(dataset: Dataset, path, target_column: str = "target") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*dataset.feature_names, target_column])
        for row, t in zip(dataset.features, dataset.target):
            w.writerow([repr(float(v)) for v in row] + [repr(float(t))])
    return path


@dataclass(frozen=True)
class FeatureSelection:
    k: int = 10
    seed: int = 0
    forest: TreeEnsembleSpec = field(default_factory=lambda: default_ensemble_spec("random_forest"))
    method: str = "rf_importance"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.method != "rf_importance":
            raise ValueError(f"unknown selection method {self.method!r}")


def rf_importances(dataset: Dataset, selection: FeatureSelection) -> np.ndarray:
    spec = replace(selection.forest, seed=selection.seed)
    forest = fit_tree_ensemble(spec, dataset.features, dataset.target)
    return forest.feature_importances()


def select_features(dataset: Dataset, selection: FeatureSelection) -> Dataset:
    """Keep the k most important columns (original order), fitted on all rows."""
    p = dataset.n_features
    if selection.k > p:
        raise DatasetError(f"{dataset.name}: k={selection.k} exceeds {p} features")
    if np.ptp(dataset.target) == 0:
        log.warning("%s: constant target, importances undefined; keeping the first %d columns",
                    dataset.name, selection.k)
        keep = np.arange(selection.k)
    else:
        imp = rf_importances(dataset, selection)
        # highest importance first; equal importance keeps the lower column index
        ranked = np.lexsort((np.arange(p), -imp))
        keep = np.sort(ranked[:selection.k])
    return Dataset(f"{dataset.name}_reduced", dataset.features[:, keep], dataset.target,
                   tuple(dataset.feature_names[i] for i in keep), dataset.provenance)


def make_synthetic(name: str, n_samples: int, n_features: int, seed: int = 0,
                   n_latent: int = 6, noise: float = 0.3) -> Dataset:
    """QSAR-like stand-in: correlated, heterogeneously scaled descriptors driven by a
    few latent factors, with a nonlinear noisy activity target."""
    rng = np.random.default_rng(seed)
    Z = rng.normal(size=(n_samples, n_latent))
    loadings = rng.normal(size=(n_latent, n_features)) * rng.uniform(0.2, 1.0, n_features)
    X = Z @ loadings + 0.5 * rng.normal(size=(n_samples, n_features))
    scales = 10.0 ** rng.uniform(-1.0, 2.0, n_features)
    offsets = rng.normal(0.0, 5.0, n_features)
    X = X * scales + offsets
    counts = rng.random(n_features) < 0.15
    X[:, counts] = np.round(np.abs(X[:, counts]))
    n_const = max(1, n_features // 100)
    X[:, rng.choice(n_features, n_const, replace=False)] = 1.0
    y = (1.5 * Z[:, 0] + np.sin(2.0 * Z[:, 1]) + 0.5 * Z[:, 2] * Z[:, 3]
         + 0.8 * (Z[:, 4] > 0) + noise * rng.normal(size=n_samples))
    y = 5.0 + y
    names = tuple(f"D{j:04d}" for j in range(n_features))
    return Dataset(name, X, y, names, "synthetic")


def synthetic_suite(seed: int = 0) -> list[Dataset]:
    """Four stand-ins matching the sample and descriptor counts of the QSAR collection."""
    return [make_synthetic(name, n, p, seed=seed + i)
            for i, (name, (n, p, _)) in enumerate(QSAR_SHAPES.items())]
