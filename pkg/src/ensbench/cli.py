"""``ensbench`` command line: run the benchmark grid, re-rank, cluster, self-test."""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, bench, cluster
from .data import DatasetError, FeatureSelection, load_dataset, synthetic_suite, write_dataset
from .ensemble import EnsembleMode
from .regressors import BASE_LABELS, DEFAULT_BASES, RegressorSpec

log = logging.getLogger("ensbench")

MODE_ALIASES = {"single": "single", "bg": "bagging", "bagging": "bagging",
                "ar": "additive_regression", "additive_regression": "additive_regression"}
DEFAULT_CONFIG = {
    "bases": list(DEFAULT_BASES),
    "modes": ["single", "bagging", "additive_regression"],
    "n_members": 10,
    "n_rounds": 10,
    "repeats": 5,
    "test_fraction": 0.5,
    "master_seed": 42,
    "feature_selection": {"k": 10, "seed": 0},
    "ar_combination": "mean",
    "cluster": {"linkage": "average", "standardize": False, "input": "rmse"},
}
TARGET_COLUMN = "activity"


class ConfigError(ValueError):
    pass


# ------------------------------------------------------------------ configuration

def parse_modes(spec) -> list[str]:
    items = spec.split(",") if isinstance(spec, str) else list(spec)
    out = []
    for item in items:
        key = str(item).strip().lower()
        if key not in MODE_ALIASES:
            raise ConfigError(f"unknown mode {item!r}; use single, bg or ar")
        if MODE_ALIASES[key] not in out:
            out.append(MODE_ALIASES[key])
    if not out:
        raise ConfigError("no modes selected")
    return out


def _base_spec(entry) -> RegressorSpec:
    if isinstance(entry, str):
        return RegressorSpec(entry)
    if isinstance(entry, dict) and "key" in entry:
        return RegressorSpec(entry["key"], dict(entry.get("params", {})), entry.get("label", ""))
    raise ConfigError(f"cannot read base entry {entry!r}")


def normalize_config(raw: dict, base_dir: Path, data_dir: Path | None = None) -> dict:
    """Fill defaults and resolve dataset paths to absolute ones."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    if "config" in raw and isinstance(raw["config"], dict):
        raw = raw["config"]  # a run manifest replays as its config snapshot
    unknown = set(raw) - set(DEFAULT_CONFIG) - {"datasets"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg = json.loads(json.dumps(DEFAULT_CONFIG))
    cfg.update({k: v for k, v in raw.items() if k != "datasets"})
    cfg["modes"] = parse_modes(cfg["modes"])
    root = data_dir if data_dir is not None else base_dir
    datasets = []
    for i, entry in enumerate(raw.get("datasets", [])):
        if isinstance(entry, str):
            entry = {"path": entry}
        if "path" not in entry:
            raise ConfigError(f"dataset entry {i} has no path")
        path = Path(entry["path"])
        if not path.is_absolute():
            path = root / path
        datasets.append({"path": str(path.resolve()),
                         "target": entry.get("target", TARGET_COLUMN),
                         "name": entry.get("name") or path.stem})
    cfg["datasets"] = datasets
    return cfg


def grid_config(cfg: dict, feature_selection: bool) -> bench.GridConfig:
    modes = []
    for kind in cfg["modes"]:
        modes.append(EnsembleMode(kind, n_members=int(cfg["n_members"]),
                                  n_rounds=int(cfg["n_rounds"])))
    fs = None
    if feature_selection and cfg.get("feature_selection"):
        fs = FeatureSelection(**cfg["feature_selection"])
    return bench.GridConfig(
        bases=tuple(_base_spec(b) for b in cfg["bases"]), modes=tuple(modes),
        repeats=int(cfg["repeats"]), test_fraction=float(cfg["test_fraction"]),
        master_seed=int(cfg["master_seed"]), feature_selection=fs,
        ar_combination=cfg["ar_combination"])


def load_config(path, data_dir=None, modes=None) -> dict:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    cfg = normalize_config(raw, path.parent, Path(data_dir) if data_dir else None)
    if modes:
        cfg["modes"] = parse_modes(modes)
    env_seed = os.environ.get("ENSBENCH_SEED")
    if env_seed not in (None, ""):
        try:
            cfg["master_seed"] = int(env_seed)
        except ValueError:
            raise ConfigError(f"ENSBENCH_SEED must be an integer, got {env_seed!r}") from None
    if not 0 <= int(cfg["master_seed"]) < 2**64:
        raise ConfigError("master_seed must be a 64-bit unsigned integer")
    return cfg


# ------------------------------------------------------------------ report writing

def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _summary_grid(labels) -> tuple[list[RegressorSpec], list[EnsembleMode]] | None:
    """Recover (bases, modes) from table row labels, or None if not a full grid."""
    by_label = {v: k for k, v in BASE_LABELS.items()}
    prefixes = {"BG-": "bagging", "AR-": "additive_regression"}
    bases, kinds, seen = [], [], set()
    for lab in labels:
        kind, name = "single", lab
        for pre, k in prefixes.items():
            if lab.startswith(pre) and lab[len(pre):] in by_label:
                kind, name = k, lab[len(pre):]
        if name not in by_label:
            return None
        if name not in bases:
            bases.append(name)
        if kind not in kinds:
            kinds.append(kind)
        seen.add((name, kind))
    if len(seen) != len(bases) * len(kinds) or len(seen) != len(labels):
        return None
    return ([RegressorSpec(by_label[b]) for b in bases], [EnsembleMode(k) for k in kinds])


def cluster_outputs(table_rows, columns, values, out: Path, linkage: str,
                    standardize: bool, axes=("algorithms", "datasets")) -> dict:
    written = {}
    for axis in axes:
        try:
            d = cluster.cluster_table(table_rows, columns, values, axis, linkage, standardize)
        except ValueError as exc:
            log.warning("skipping %s dendrogram: %s", axis, exc)
            continue
        for fmt in ("dot", "json"):
            p = cluster.emit_dendrogram(d, fmt, out / f"dendrogram_{axis}.{fmt}")
            written[p.name] = p
    return written


def write_reports(table: bench.RmseTable, out: Path, cluster_cfg: dict,
                  bases=None, modes=None, title: str | None = None) -> dict[str, Path]:
    out.mkdir(parents=True, exist_ok=True)
    files = {"rmse.csv": bench.write_rmse_csv(table, out / "rmse.csv")}
    ranks = bench.rank_table(table)
    files["ranks.csv"] = bench.write_ranks_csv(ranks, out / "ranks.csv")
    if bases is None:
        grid = _summary_grid(table.rows)
        if grid is not None:
            bases, modes = grid
    if bases is not None:
        summary = bench.summarize(ranks, bases, modes)
        files["summary.md"] = bench.write_summary_md(summary, out / "summary.md", title)
    else:
        log.warning("rows do not form a full base x mode grid; no summary written")
    files["best.csv"] = bench.write_best_csv(bench.best_per_dataset(table), out / "best.csv")
    source = cluster_cfg.get("input", "rmse")
    if source not in ("rmse", "ranks"):
        raise ConfigError(f"cluster input must be 'rmse' or 'ranks', got {source!r}")
    values = table.values if source == "rmse" else ranks.ranks.astype(np.float64)
    files.update(cluster_outputs(table.rows, table.columns, values, out,
                                 cluster_cfg.get("linkage", "average"),
                                 bool(cluster_cfg.get("standardize", False))))
    return files


# ------------------------------------------------------------------ commands

def cmd_run(config_path, out_dir, threads: int | None = None, modes=None,
            data_dir=None) -> int:
    try:
        cfg = load_config(config_path, data_dir, modes)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if not cfg["datasets"]:
        print("error: no datasets", file=sys.stderr)
        return 1
    try:
        datasets = [load_dataset(d["path"], d["target"], d["name"]) for d in cfg["datasets"]]
        families = [("original", grid_config(cfg, False), Path(out_dir))]
        if cfg.get("feature_selection"):
            families.append(("reduced", grid_config(cfg, True), Path(out_dir) / "reduced"))
    except (DatasetError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    threads = threads or bench.default_threads()
    out = Path(out_dir)
    manifest = {
        "tool": "ensbench", "version": __version__, "config": cfg,
        "master_seed": int(cfg["master_seed"]),
        "datasets": [{"name": ds.name, "n_samples": ds.n_samples,
                      "n_features": ds.n_features} for ds in datasets],
        "families": {},
    }
    digests = {}
    sentinels = 0
    try:
        out.mkdir(parents=True, exist_ok=True)
        for family, gcfg, fam_out in families:
            log.info("running %s family: %d algorithms x %d datasets x %d repeats",
                     family, len(gcfg.row_labels), len(datasets), gcfg.repeats)
            step = max(1, len(gcfg.row_labels) * len(datasets) * gcfg.repeats // 20)

            def progress(done, total, family=family):
                if done % step == 0 or done == total:
                    log.info("%s: %d/%d cells", family, done, total)

            table = bench.run_grid(gcfg, datasets, threads=threads, progress=progress)
            title = None if family == "original" else "Reduced feature set"
            files = write_reports(table, fam_out, cfg["cluster"], list(gcfg.bases),
                                  list(gcfg.modes), title)
            for name, path in sorted(files.items()):
                digests[str(path.relative_to(out))] = _sha256(path)
            sentinels += len(table.failures)
            manifest["families"][family] = {
                "datasets": list(table.columns),
                "sentinels": list(table.failures),
                "cell_seeds": list(table.seeds),
            }
        manifest["digests"] = dict(sorted(digests.items()))
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n",
                                           encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot write outputs: {exc}", file=sys.stderr)
        return 1
    if sentinels:
        log.warning("%d cells failed and hold +inf sentinels (see manifest.json)", sentinels)
        return 2
    return 0


def cmd_rank(rmse_path, out_dir) -> int:
    try:
        table = bench.read_rmse_csv(rmse_path)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        ranks = bench.rank_table(table)
        bench.write_ranks_csv(ranks, out / "ranks.csv")
        grid = _summary_grid(table.rows)
        if grid is not None:
            bench.write_summary_md(bench.summarize(ranks, *grid), out / "summary.md")
        bench.write_best_csv(bench.best_per_dataset(table), out / "best.csv")
    except (OSError, ValueError, StopIteration) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def cmd_cluster(table_path, axis, out_dir, linkage="average", standardize=False) -> int:
    try:
        table = bench.read_rmse_csv(table_path)
        d = cluster.cluster_table(table.rows, table.columns, table.values, axis,
                                  linkage, standardize)
        for fmt in ("dot", "json"):
            cluster.emit_dendrogram(d, fmt, Path(out_dir) / f"dendrogram_{axis}.{fmt}")
    except (OSError, ValueError, StopIteration) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def cmd_selftest() -> int:
    from .selftest import run_selftest
    return 0 if run_selftest() else 1


def cmd_synth(out_dir, seed: int = 0) -> int:
    """Write the four synthetic stand-in datasets and a matching config."""
    out = Path(out_dir)
    try:
        entries = []
        for ds in synthetic_suite(seed):
            write_dataset(ds, out / f"{ds.name}.csv", TARGET_COLUMN)
            entries.append({"path": f"{ds.name}.csv", "target": TARGET_COLUMN, "name": ds.name})
        cfg = {"datasets": entries, **DEFAULT_CONFIG}
        (out / "config.json").write_text(json.dumps(cfg, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


# ------------------------------------------------------------------ entry point

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ensbench",
                                 description="Ensemble regression benchmark for QSAR tables.")
    ap.add_argument("--version", action="version", version=f"ensbench {__version__}")
    ap.add_argument("-q", "--quiet", action="store_true", help="only log warnings")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the benchmark grid")
    p.add_argument("--config", required=True, help="JSON config or a previous manifest.json")
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, default=None, help="worker processes")
    p.add_argument("--modes", default=None, help="comma list of single,bg,ar")
    p.add_argument("--data-dir", default=None, help="base for relative dataset paths")

    p = sub.add_parser("rank", help="rank an existing rmse.csv")
    p.add_argument("--rmse", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("cluster", help="cluster an existing table")
    p.add_argument("--table", required=True)
    p.add_argument("--axis", choices=("algorithms", "datasets"), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--linkage", choices=cluster.LINKAGES, default="average")
    p.add_argument("--standardize", action="store_true")

    sub.add_parser("selftest", help="run the built-in oracle checks")

    p = sub.add_parser("synth", help="write synthetic datasets and a config")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "run":
        return cmd_run(args.config, args.out, args.threads, args.modes, args.data_dir)
    if args.command == "rank":
        return cmd_rank(args.rmse, args.out)
    if args.command == "cluster":
        return cmd_cluster(args.table, args.axis, args.out, args.linkage, args.standardize)
    if args.command == "selftest":
        return cmd_selftest()
    return cmd_synth(args.out, args.seed)


if __name__ == "__main__":
    sys.exit(main())
