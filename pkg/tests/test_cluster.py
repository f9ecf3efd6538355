import itertools
import json
import logging

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ensbench.cluster import (Dendrogram, cluster_table, dendrogram_dot, dendrogram_from_json,
                              dendrogram_json, emit_dendrogram, hierarchical_cluster)

from oracles import average_linkage_brute


def test_three_point_example():
    d = hierarchical_cluster(np.array([0.0, 1.0, 10.0]), ["a", "b", "c"])
    assert d.merges == ((0, 1, 1.0, 2), (2, 3, 9.5, 3))
    assert d.heights.tolist() == [1.0, 9.5]


def test_identical_rows_merge_first_at_zero():
    d = hierarchical_cluster(np.array([[1.0, 2.0], [5.0, 5.0], [1.0, 2.0]]), list("abc"))
    assert d.merges[0][:3] == (0, 2, 0.0)


def test_single_pair():
    d = hierarchical_cluster(np.array([[0.0, 0.0], [3.0, 4.0]]), ["p", "q"])
    assert d.merges == ((0, 1, 5.0, 2),)


@pytest.mark.parametrize("linkage,final", [("average", 9.5), ("complete", 10.0),
                                           ("single", 9.0)])
def test_linkages_on_three_points(linkage, final):
    d = hierarchical_cluster(np.array([0.0, 1.0, 10.0]), list("abc"), linkage=linkage)
    assert d.heights.tolist() == [1.0, final]


def test_tie_break_smallest_pair():
    # equally spaced points: three nearest pairs tie and (0, 1) merges first
    d = hierarchical_cluster(np.array([0.0, 2.0, 4.0, 6.0]), list("abcd"))
    assert d.merges[0][:2] == (0, 1)


def test_nonfinite_rows_excluded(caplog):
    pts = np.array([[0.0], [np.inf], [1.0], [3.0]])
    with caplog.at_level(logging.WARNING):
        d = hierarchical_cluster(pts, list("abcd"))
    assert d.leaf_labels == ("a", "c", "d")
    assert "b" in caplog.text


def test_too_few_rows():
    with pytest.raises(ValueError):
        hierarchical_cluster(np.array([[0.0], [np.inf]]), ["a", "b"])
    with pytest.raises(ValueError):
        hierarchical_cluster(np.array([[1.0], [2.0]]), ["a", "b"], linkage="ward")


def test_standardize_changes_geometry():
    pts = np.array([[0.0, 0.0], [0.0, 100.0], [1.0, 0.0]])
    raw = hierarchical_cluster(pts, list("abc"))
    std = hierarchical_cluster(pts, list("abc"), standardize=True)
    assert raw.merges[0][:2] == (0, 2)
    assert std.merges[0][:2] != raw.merges[0][:2] or std.heights[0] != raw.heights[0]


def test_dot_two_leaves():
    d = hierarchical_cluster(np.array([0.0, 2.0]), ["x", "y"])
    dot = dendrogram_dot(d)
    assert dot.count("[label=") == 3
    assert dot.count("->") == 2


def test_dot_three_point_heights():
    d = hierarchical_cluster(np.array([0.0, 1.0, 10.0]), list("abc"))
    dot = dendrogram_dot(d)
    assert 'label="h=1"' in dot and 'label="h=9.5"' in dot


def test_json_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    d = hierarchical_cluster(rng.normal(size=(7, 3)), [f"L{i}" for i in range(7)])
    assert dendrogram_from_json(dendrogram_json(d)) == d
    p = emit_dendrogram(d, "json", tmp_path / "d.json")
    assert dendrogram_from_json(p.read_text()) == d
    doc = json.loads(p.read_text())
    assert doc["tree"]["size"] == 7


def test_emission_byte_stable(tmp_path):
    d = hierarchical_cluster(np.array([0.0, 1.0, 10.0, 4.0]), list("abcd"))
    for fmt in ("dot", "json"):
        a = emit_dendrogram(d, fmt, tmp_path / f"a.{fmt}").read_bytes()
        b = emit_dendrogram(d, fmt, tmp_path / f"b.{fmt}").read_bytes()
        assert a == b
    with pytest.raises(ValueError):
        emit_dendrogram(d, "png", tmp_path / "x.png")


def test_unwritable_path(tmp_path):
    d = hierarchical_cluster(np.array([0.0, 1.0]), list("ab"))
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError):
        emit_dendrogram(d, "dot", blocker / "sub" / "d.dot")


def test_dendrogram_invariants():
    with pytest.raises(ValueError):
        Dendrogram(((0, 1, 1.0, 2),), ("a", "b", "c"))


def test_cluster_table_axes():
    v = np.array([[1.0, 2.0, 3.0], [1.1, 2.1, 3.1], [5.0, 0.0, 1.0], [np.inf, 1.0, 1.0]])
    rows, cols = ("A", "B", "C", "D"), ("x", "y", "z")
    alg = cluster_table(rows, cols, v, "algorithms")
    assert alg.leaf_labels == ("A", "B", "C")
    ds = cluster_table(rows, cols, v, "datasets")
    assert ds.leaf_labels == cols and len(ds.merges) == 2
    with pytest.raises(ValueError):
        cluster_table(rows, cols, v, "both")


@pytest.mark.parametrize("seed", range(30))
def test_three_items_match_exhaustive(seed):
    rng = np.random.default_rng(seed)
    P = rng.normal(size=(3, 2))
    D = {(i, j): np.linalg.norm(P[i] - P[j]) for i, j in itertools.combinations(range(3), 2)}
    first = min(D, key=lambda k: (D[k], k))
    other = ({0, 1, 2} - set(first)).pop()
    final = np.mean([D[tuple(sorted((other, m)))] for m in first])
    d = hierarchical_cluster(P, list("abc"))
    assert d.merges[0][:2] == first
    assert d.heights[0] == pytest.approx(D[first], abs=1e-12)
    assert d.heights[1] == pytest.approx(final, abs=1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_matches_naive_recomputation(seed):
    rng = np.random.default_rng(seed)
    P = rng.normal(size=(8, 3))
    heights, parts = average_linkage_brute(P)
    d = hierarchical_cluster(P, [str(i) for i in range(8)])
    np.testing.assert_allclose(d.heights, heights, rtol=1e-12)
    got = [frozenset(frozenset(int(x) for x in c) for c in p) for p in d.partitions()[1:]]
    assert got == parts


def _canonical(d):
    return d.heights, d.partitions()


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_permutation_isomorphism(seed):
    rng = np.random.default_rng(seed)
    P = rng.normal(size=(6, 3))
    labels = [f"p{i}" for i in range(6)]
    perm = rng.permutation(6)
    a = hierarchical_cluster(P, labels)
    b = hierarchical_cluster(P[perm], [labels[i] for i in perm])
    np.testing.assert_allclose(a.heights, b.heights, rtol=1e-12, atol=1e-14)
    assert a.partitions() == b.partitions()


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 12))
def test_heights_nondecreasing_average(seed, n):
    rng = np.random.default_rng(seed)
    d = hierarchical_cluster(rng.normal(size=(n, 2)), [str(i) for i in range(n)])
    assert len(d.merges) == n - 1
    assert np.all(np.diff(d.heights) >= -1e-12)
    assert d.members()[-1] == frozenset(d.leaf_labels)
