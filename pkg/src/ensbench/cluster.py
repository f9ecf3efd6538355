"""Agglomerative clustering of benchmark tables and dendrogram emission."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

log = logging.getLogger(__name__)

LINKAGES = ("average", "complete", "single")


@dataclass(frozen=True)
class Dendrogram:
    """``merges[k] = (a, b, height, size)``; ids below n_leaves are leaves and
    merge k creates cluster ``n_leaves + k`` (a < b)."""

    merges: tuple[tuple[int, int, float, int], ...]
    leaf_labels: tuple[str, ...]

    def __post_init__(self):
        n = len(self.leaf_labels)
        if n >= 1 and len(self.merges) != n - 1:
            raise ValueError(f"{n} leaves need {n - 1} merges, got {len(self.merges)}")
        merges = tuple((int(a), int(b), float(h), int(s)) for a, b, h, s in self.merges)
        object.__setattr__(self, "merges", merges)
        object.__setattr__(self, "leaf_labels", tuple(self.leaf_labels))

    @property
    def n_leaves(self) -> int:
        return len(self.leaf_labels)

    @property
    def heights(self) -> np.ndarray:
        return np.array([m[2] for m in self.merges])

    def members(self) -> list[frozenset[str]]:
        """Leaf-label set of every cluster id."""
        sets = [frozenset([lab]) for lab in self.leaf_labels]
        for a, b, _, _ in self.merges:
            sets.append(sets[a] | sets[b])
        return sets

    def partitions(self) -> list[frozenset[frozenset[str]]]:
        """Partition of the leaf labels after each merge, starting from singletons."""
        sets = self.members()
        active = set(range(self.n_leaves))
        out = [frozenset(sets[i] for i in active)]
        for k, (a, b, _, _) in enumerate(self.merges):
            active -= {a, b}
            active.add(self.n_leaves + k)
            out.append(frozenset(sets[i] for i in active))
        return out


def _lance_williams(linkage, d_al, d_bl, n_a, n_b):
    if linkage == "average":
        return (n_a * d_al + n_b * d_bl) / (n_a + n_b)
    if linkage == "complete":
        return np.maximum(d_al, d_bl)
    return np.minimum(d_al, d_bl)


def hierarchical_cluster(points, labels: Sequence[str], linkage: str = "average",
                         standardize: bool = False) -> Dendrogram:
    """Euclidean agglomerative clustering with Lance-Williams updates.

    Rows holding non-finite values are dropped with a warning. Equal distances
    merge the pair with the smallest (id_a, id_b) first.
    """
    if linkage not in LINKAGES:
        raise ValueError(f"unknown linkage {linkage!r}")
    P = np.asarray(points, dtype=np.float64)
    if P.ndim == 1:
        P = P[:, None]
    labels = [str(s) for s in labels]
    if P.ndim != 2 or len(labels) != P.shape[0]:
        raise ValueError("points and labels disagree in length")
    ok = np.all(np.isfinite(P), axis=1)
    if not ok.all():
        dropped = [labels[i] for i in np.flatnonzero(~ok)]
        log.warning("excluding %d rows with non-finite values: %s", len(dropped),
                    ", ".join(dropped))
        P = P[ok]
        labels = [lab for lab, keep in zip(labels, ok) if keep]
    n = P.shape[0]
    if n < 2:
        raise ValueError(f"need at least 2 valid rows to cluster, got {n}")
    if standardize:
        sd = P.std(axis=0)
        P = (P - P.mean(axis=0)) / np.where(sd > 0, sd, 1.0)

    total = 2 * n - 1
    D = np.full((total, total), np.inf)
    diff = P[:, None, :] - P[None, :, :]
    D[:n, :n] = np.sqrt(np.sum(diff * diff, axis=2))
    active = np.zeros(total, dtype=bool)
    active[:n] = True
    size = np.zeros(total, dtype=np.int64)
    size[:n] = 1
    upper = np.triu(np.ones((total, total), dtype=bool), k=1)
    merges = []
    for k in range(n - 1):
        mask = upper & active[:, None] & active[None, :]
        cand = np.where(mask, D, np.inf)
        # row-major argmin picks the smallest (a, b) among equal distances
        a, b = divmod(int(np.argmin(cand)), total)
        h = float(D[a, b])
        new = n + k
        others = np.flatnonzero(active)
        others = others[(others != a) & (others != b)]
        d_new = _lance_williams(linkage, D[a, others], D[b, others], size[a], size[b])
        D[new, others] = d_new
        D[others, new] = d_new
        active[[a, b]] = False
        active[new] = True
        size[new] = size[a] + size[b]
        merges.append((a, b, h, int(size[new])))
    return Dendrogram(tuple(merges), tuple(labels))


# ------------------------------------------------------------------ emission

def _height_label(h: float) -> str:
    return f"{h:.6g}"


def _dot_escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


def dendrogram_dot(d: Dendrogram) -> str:
    lines = ["digraph dendrogram {", "  node [shape=box];"]
    for i, lab in enumerate(d.leaf_labels):
        lines.append(f'  n{i} [label="{_dot_escape(lab)}"];')
    for k, (a, b, h, _) in enumerate(d.merges):
        nid = d.n_leaves + k
        lines.append(f'  n{nid} [label="h={_height_label(h)}", shape=ellipse];')
        lines.append(f"  n{nid} -> n{a};")
        lines.append(f"  n{nid} -> n{b};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _tree(d: Dendrogram, cid: int) -> dict:
    if cid < d.n_leaves:
        return {"id": cid, "label": d.leaf_labels[cid]}
    a, b, h, s = d.merges[cid - d.n_leaves]
    return {"id": cid, "height": h, "size": s, "children": [_tree(d, a), _tree(d, b)]}


def dendrogram_json(d: Dendrogram) -> str:
    doc = {
        "leaf_labels": list(d.leaf_labels),
        "merges": [[a, b, h, s] for a, b, h, s in d.merges],
        "tree": _tree(d, d.n_leaves + len(d.merges) - 1) if d.merges else None,
    }
    return json.dumps(doc, indent=2) + "\n"


def dendrogram_from_json(text: str) -> Dendrogram:
    doc = json.loads(text)
    return Dendrogram(tuple(tuple(m) for m in doc["merges"]), tuple(doc["leaf_labels"]))


def emit_dendrogram(d: Dendrogram, format: str, path) -> Path:
    if format == "dot":
        text = dendrogram_dot(d)
    elif format == "json":
        text = dendrogram_json(d)
    else:
        raise ValueError(f"unknown dendrogram format {format!r}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def cluster_table(rows: Sequence[str], columns: Sequence[str], values, axis: str,
                  linkage: str = "average", standardize: bool = False) -> Dendrogram:
    """Cluster algorithms (rows over datasets) or datasets (columns over algorithms)."""
    V = np.asarray(values, dtype=np.float64)
    if axis == "algorithms":
        return hierarchical_cluster(V, rows, linkage, standardize)
    if axis == "datasets":
        # an algorithm with a sentinel anywhere is dropped as a feature, not a dataset
        keep = np.all(np.isfinite(V), axis=1)
        if not keep.all():
            log.warning("dropping %d algorithms with non-finite cells before clustering "
                        "datasets", int((~keep).sum()))
        return hierarchical_cluster(V[keep].T, columns, linkage, standardize)
    raise ValueError(f"axis must be 'algorithms' or 'datasets', got {axis!r}")
