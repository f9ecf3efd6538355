"""Experimental protocol: grid of (ensemble mode x base) over datasets, repeated
random 50/50 hold-out, RMSE tables, success ranks and summary pivots."""
from __future__ import annotations

import csv
import io
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .data import Dataset, FeatureSelection, select_features
from .ensemble import EnsembleMode, fit_ensemble
from .regressors import RegressorSpec, base_specs
from .tree import derive_seed

log = logging.getLogger(__name__)

MODE_COLUMN = {"bagging": "BG", "additive_regression": "AR", "single": "Single"}
SUMMARY_ORDER = ("bagging", "additive_regression", "single")


def default_modes(n_members: int = 10, n_rounds: int = 10) -> tuple[EnsembleMode, ...]:
    return (EnsembleMode("single"),
            EnsembleMode("bagging", n_members=n_members),
            EnsembleMode("additive_regression", n_rounds=n_rounds))


@dataclass(frozen=True)
class GridConfig:
    bases: tuple[RegressorSpec, ...] = field(default_factory=lambda: tuple(base_specs()))
    modes: tuple[EnsembleMode, ...] = field(default_factory=default_modes)
    repeats: int = 5
    test_fraction: float = 0.5
    master_seed: int = 0
    feature_selection: FeatureSelection | None = None
    ar_combination: str = "mean"

    def __post_init__(self):
        if not self.bases or not self.modes:
            raise ValueError("need at least one base and one mode")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must lie in (0, 1)")
        if self.ar_combination not in ("mean", "median"):
            raise ValueError("ar_combination must be 'mean' or 'median'")

    @property
    def row_keys(self) -> list[tuple[int, int]]:
        """(base index, mode index) per table row, base-major."""
        return [(b, m) for b in range(len(self.bases)) for m in range(len(self.modes))]

    @property
    def row_labels(self) -> list[str]:
        return [self.modes[m].prefix + self.bases[b].label for b, m in self.row_keys]


def rmse(predicted, actual) -> float:
    p = np.asarray(predicted, dtype=np.float64)
    a = np.asarray(actual, dtype=np.float64)
    if p.shape != a.shape or p.ndim != 1:
        raise ValueError(f"length mismatch: {p.shape} vs {a.shape}")
    if len(p) == 0:
        raise ValueError("rmse of empty vectors")
    return math.sqrt(float(np.mean((p - a) ** 2)))


def split_sizes(n: int, test_fraction: float) -> tuple[int, int]:
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    n_train = math.ceil(n * (1.0 - test_fraction))
    if n_train < 1 or n_train >= n:
        raise ValueError(f"split of {n} rows at fraction {test_fraction} leaves an empty part")
    return n_train, n - n_train


def shuffle_split(dataset: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded shuffle; the first ceil(n * (1 - fraction)) rows train, the rest test."""
    n_train, _ = split_sizes(dataset.n_samples, test_fraction)
    perm = np.random.default_rng(seed).permutation(dataset.n_samples)
    return dataset.subset_rows(perm[:n_train]), dataset.subset_rows(perm[n_train:])


def split_seed(master_seed: int, dataset_index: int, repeat: int) -> int:
    return derive_seed(master_seed, 1, dataset_index, repeat)


def cell_seed(master_seed: int, dataset_index: int, mode_index: int, base_index: int,
              repeat: int) -> int:
    return derive_seed(master_seed, 2, dataset_index, mode_index, base_index, repeat)


@dataclass(frozen=True, eq=False)
class RmseTable:
    rows: tuple[str, ...]
    columns: tuple[str, ...]
    values: np.ndarray
    repeat_values: np.ndarray | None = None
    failures: tuple[dict, ...] = ()
    seeds: tuple[dict, ...] = ()

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (len(self.rows), len(self.columns)):
            raise ValueError(f"values shape {v.shape} does not match table labels")
        if np.any(np.isnan(v)) or np.any(v < 0):
            raise ValueError("RMSE cells must be >= 0 or +inf")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True, eq=False)
class RankTable:
    rows: tuple[str, ...]
    columns: tuple[str, ...]
    ranks: np.ndarray
    mean: np.ndarray
    std: np.ndarray


@dataclass(frozen=True, eq=False)
class SummaryTable:
    rows: tuple[str, ...]
    columns: tuple[str, ...]
    cells: np.ndarray
    avg_column: np.ndarray
    avg_row: np.ndarray


# ------------------------------------------------------------------ grid execution

_WORKER: dict = {}


def _init_worker(datasets, config):
    _WORKER["datasets"] = datasets
    _WORKER["config"] = config
    try:
        from threadpoolctl import threadpool_limits
        _WORKER["limits"] = threadpool_limits(1)
    except ImportError:
        pass


def _run_cell(task):
    d, b, m, r = task
    datasets, config = _WORKER["datasets"], _WORKER["config"]
    ds = datasets[d]
    train, test = shuffle_split(ds, config.test_fraction,
                                split_seed(config.master_seed, d, r))
    seed = cell_seed(config.master_seed, d, m, b, r)
    mode = replace(config.modes[m], seed=seed, combination=config.ar_combination)
    try:
        model = fit_ensemble(config.bases[b], mode, train.features, train.target)
        pred = np.asarray(model.predict(test.features), dtype=np.float64)
        if not np.all(np.isfinite(pred)):
            raise FloatingPointError("non-finite predictions")
        return task, rmse(pred, test.target), None
    except Exception as exc:
        return task, math.inf, f"{type(exc).__name__}: {exc}"


def run_grid(config: GridConfig, datasets: Sequence[Dataset], threads: int = 1,
             progress: Callable[[int, int], None] | None = None) -> RmseTable:
    """Fit every (dataset, mode, base, repeat) cell and average test RMSE over repeats.

    Split seeds depend on (master seed, dataset, repeat) only, so every algorithm
    sees the same partitions; model seeds depend on the full cell coordinates.
    Failed fits become +inf cells and are listed in ``failures``.
    """
    if not datasets:
        raise ValueError("no datasets")
    datasets = list(datasets)
    if config.feature_selection is not None:
        datasets = [select_features(ds, config.feature_selection) for ds in datasets]
    for ds in datasets:
        split_sizes(ds.n_samples, config.test_fraction)

    n_b, n_m, n_r = len(config.bases), len(config.modes), config.repeats
    tasks = [(d, b, m, r) for d in range(len(datasets)) for b in range(n_b)
             for m in range(n_m) for r in range(n_r)]
    rep = np.full((n_b * n_m, len(datasets), n_r), np.nan)
    failures = []
    done = 0

    def collect(result):
        nonlocal done
        (d, b, m, r), value, err = result
        row = b * n_m + m
        rep[row, d, r] = value
        if err is not None:
            failures.append({"dataset": datasets[d].name,
                             "algorithm": config.row_labels[row],
                             "repeat": r, "error": err})
        done += 1
        if progress is not None:
            progress(done, len(tasks))

    if threads <= 1:
        from threadpoolctl import threadpool_limits
        _WORKER.clear()
        with threadpool_limits(1):
            _init_worker(datasets, config)
            for t in tasks:
                collect(_run_cell(t))
        _WORKER.clear()
    else:
        import multiprocessing as mp

        ctx = mp.get_context("fork") if "fork" in mp.get_all_start_methods() else None
        with ProcessPoolExecutor(max_workers=threads, mp_context=ctx,
                                 initializer=_init_worker,
                                 initargs=(datasets, config)) as pool:
            for result in pool.map(_run_cell, tasks, chunksize=1):
                collect(result)

    failures.sort(key=lambda f: (f["dataset"], f["algorithm"], f["repeat"]))
    seeds = tuple(
        {"dataset": datasets[d].name, "algorithm": config.row_labels[b * n_m + m],
         "repeat": r, "split_seed": split_seed(config.master_seed, d, r),
         "cell_seed": cell_seed(config.master_seed, d, m, b, r)}
        for d, b, m, r in tasks)
    means = rep.mean(axis=2)
    return RmseTable(tuple(config.row_labels), tuple(ds.name for ds in datasets),
                     means, rep, tuple(failures), seeds)


# ------------------------------------------------------------------ rankings

def rank_table(table: RmseTable) -> RankTable:
    """Zero-based ranks per column; ties (and +inf sentinels) resolved by row order."""
    v = table.values
    if v.size == 0:
        raise ValueError("empty RMSE table")
    ranks = np.empty(v.shape, dtype=np.int64)
    for c in range(v.shape[1]):
        order = np.argsort(v[:, c], kind="stable")
        ranks[order, c] = np.arange(v.shape[0])
    r = ranks.astype(np.float64)
    return RankTable(table.rows, table.columns, ranks, r.mean(axis=1), r.std(axis=1))


def summarize(ranks: RankTable, bases: Sequence[RegressorSpec],
              modes: Sequence[EnsembleMode]) -> SummaryTable:
    """Mean rank per (base, mode) pair across datasets, plus Avg column and row."""
    index = {label: i for i, label in enumerate(ranks.rows)}
    kinds = [k for k in SUMMARY_ORDER if any(m.kind == k for m in modes)]
    by_kind = {m.kind: m for m in modes}
    cells = np.empty((len(bases), len(kinds)))
    for i, base in enumerate(bases):
        for j, kind in enumerate(kinds):
            label = by_kind[kind].prefix + base.label
            if label not in index:
                raise KeyError(f"rank table has no row {label!r}")
            cells[i, j] = ranks.mean[index[label]]
    avg_col = cells.mean(axis=1)
    avg_row = np.append(cells.mean(axis=0), avg_col.mean())
    return SummaryTable(tuple(b.label for b in bases), tuple(MODE_COLUMN[k] for k in kinds),
                        cells, avg_col, avg_row)


def best_per_dataset(table: RmseTable) -> list[tuple[str, str, float]]:
    out = []
    for c, name in enumerate(table.columns):
        r = int(np.argmin(table.values[:, c]))
        out.append((name, table.rows[r], float(table.values[r, c])))
    return out


# ------------------------------------------------------------------ file formats

def _fmt(x: float) -> str:
    return repr(float(x))


def _write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def write_rmse_csv(table: RmseTable, path) -> Path:
    rows = [[label, *map(_fmt, vals)] for label, vals in zip(table.rows, table.values)]
    return _write_text(Path(path), _csv_text(["algorithm", *table.columns], rows))


def read_rmse_csv(path) -> RmseTable:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        labels, vals = [], []
        for row in reader:
            if row:
                labels.append(row[0])
                vals.append([float(x) for x in row[1:]])
    return RmseTable(tuple(labels), tuple(header[1:]), np.array(vals, dtype=np.float64))


def write_ranks_csv(ranks: RankTable, path, one_based: bool = False) -> Path:
    off = 1 if one_based else 0
    rows = [[label, *(str(int(x) + off) for x in rk), _fmt(mu + off), _fmt(sd)]
            for label, rk, mu, sd in zip(ranks.rows, ranks.ranks, ranks.mean, ranks.std)]
    return _write_text(Path(path), _csv_text(["algorithm", *ranks.columns, "mean", "std"], rows))


def summary_markdown(summary: SummaryTable) -> str:
    cols = [*summary.columns, "Avg"]
    lines = ["| Algorithm | " + " | ".join(cols) + " |",
             "|---|" + "---:|" * len(cols)]
    for label, cells, avg in zip(summary.rows, summary.cells, summary.avg_column):
        lines.append(f"| {label} | " + " | ".join(f"{x:.2f}" for x in (*cells, avg)) + " |")
    lines.append("| Avg | " + " | ".join(f"{x:.2f}" for x in summary.avg_row) + " |")
    return "\n".join(lines) + "\n"


def write_summary_md(summary: SummaryTable, path, title: str | None = None) -> Path:
    text = summary_markdown(summary)
    if title:
        text = f"# {title}\n\n{text}"
    return _write_text(Path(path), text)


def write_best_csv(best, path) -> Path:
    rows = [[d, a, _fmt(v)] for d, a, v in best]
    return _write_text(Path(path), _csv_text(["dataset", "algorithm", "rmse"], rows))


def default_threads() -> int:
    return max(1, min(8, os.cpu_count() or 1))
