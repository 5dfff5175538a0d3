import logging
import math

import numpy as np
import pytest

from attre2vec.data import (
    barbell_edges,
    blob_centers,
    derive_edge_labels,
    generate_barbell,
    load_dataset,
    make_splits,
    shuffle_cross_class,
    standardize,
)
from attre2vec.errors import ConfigError, DatasetIOError, ValidationError


def write(path, text):
    path.write_text(text)
    return path


@pytest.fixture
def files(tmp_path):
    return {
        "edges": write(tmp_path / "edges.csv", "src,dst,label\n# comment\na,b,0\nb,c,1\n\nc,a,1\n"),
        "feats": write(tmp_path / "ef.csv", "x,y\n0,1\n2,1\n4,1\n"),
        "nodes": write(tmp_path / "nf.csv", "id,n0\nc,3\nb,2\na,1\n"),
    }


def test_load_dataset(files):
    b = load_dataset(files["edges"], files["feats"], files["nodes"])
    g = b.graph
    assert g.num_edges == 3 and g.node_count == 3 and g.d_node == 1
    assert b.node_ids == ["c", "b", "a"]
    # node order comes from the node file: a=2, b=1, c=0
    assert g.has_edge(2, 1) and g.has_edge(0, 2)
    assert np.array_equal(b.labels, [0, 1, 1])
    col = g.edge_features[:, 0]
    assert abs(col.mean()) < 1e-12 and abs(col.std() - 1) < 1e-12
    assert np.all(g.edge_features[:, 1] == 0)  # constant column centered only


def test_load_dataset_first_appearance_ids(files):
    b = load_dataset(files["edges"], files["feats"], standardize_edges=False)
    assert b.node_ids == ["a", "b", "c"] and b.graph.d_node == 0
    assert sorted(b.graph.edge_features[:, 0]) == [0, 2, 4]  # not standardized


def test_load_dataset_errors(files, tmp_path):
    bad = write(tmp_path / "bad.csv", "x,y\n0,1\n2\n4,1\n")
    with pytest.raises(ValidationError, match=r"bad.csv:3: expected 2 fields"):
        load_dataset(files["edges"], bad)
    short = write(tmp_path / "short.csv", "x,y\n0,1\n")
    with pytest.raises(ValidationError, match="1 feature rows"):
        load_dataset(files["edges"], short)
    ghost = write(tmp_path / "ghost.csv", "src,dst,label\na,z,0\n")
    with pytest.raises(ValidationError, match=r"ghost.csv:2: unknown node id 'z'"):
        load_dataset(ghost, files["feats"], files["nodes"])
    with pytest.raises(DatasetIOError):
        load_dataset(tmp_path / "missing.csv", files["feats"])
    unlabeled = write(tmp_path / "nolab.csv", "a,b\nb,c\nc,a\n")
    with pytest.raises(ValidationError, match="no edge labels"):
        load_dataset(unlabeled, files["feats"])


def test_standardize():
    assert np.array_equal(standardize(np.array([[0.0], [2.0]])), [[-1.0], [1.0]])


def test_derive_edge_labels():
    nl = np.array([0, 0, 1, 2])
    assert derive_edge_labels([(0, 1), (1, 2), (2, 3)], nl, 3).tolist() == [0, 3, 3]
    assert derive_edge_labels([(2, 2)], nl).tolist() == [1]
    with pytest.raises(ValidationError, match="unlabeled"):
        derive_edge_labels([(0, 1)], np.array([0, -1]))


# -- splits ----------------------------------------------------------------------------

def labels_with(n_classes, per):
    return np.repeat(np.arange(n_classes), per)


@pytest.mark.parametrize("n_classes", [7, 8])
def test_split_sizes(n_classes):
    y = labels_with(n_classes, 400)
    for sp in make_splits(y, repeats=3):
        assert len(sp.train) == 20 * n_classes
        assert np.all(np.bincount(y[sp.train]) == 20)
        assert len(sp.val) == 1000 and len(sp.test) == 1000
        assert not set(sp.train) & set(sp.val) and not set(sp.val) & set(sp.test)
        assert not set(sp.train) & set(sp.test)


def test_split_determinism_and_repeats():
    y = labels_with(3, 50)
    a = make_splits(y, 5, 20, 20, repeats=4, seed=7)
    b = make_splits(y, 5, 20, 20, repeats=4, seed=7)
    assert all(np.array_equal(x.train, z.train) and np.array_equal(x.test, z.test) for x, z in zip(a, b))
    assert not np.array_equal(a[0].train, a[1].train)
    assert [s.repeat for s in a] == [0, 1, 2, 3]


def test_split_shrinks_small_graph(caplog):
    y = labels_with(3, 10)
    with caplog.at_level(logging.WARNING):
        sp = make_splits(y, repeats=1)[0]
    assert "shrinking" in caplog.text
    total = len(sp.train) + len(sp.val) + len(sp.test)
    assert total <= 30 and len(sp.train) >= 3


def test_split_empty_class():
    with pytest.raises(ValidationError, match=r"\[1\]"):
        make_splits(np.array([0, 0, 2, 2]), 1, 0, 0)


# -- barbell -----------------------------------------------------------------------------

def test_barbell_structure():
    edges, part, n = barbell_edges(7, 7)
    assert len(edges) == 50 and n == 21
    assert np.bincount(part).tolist() == [21, 8, 21]
    for c, p in [(3, 0), (4, 2), (5, 1)]:
        assert len(barbell_edges(c, p)[0]) == 2 * math.comb(c, 2) + p + 1


def test_barbell_clean_features_align_with_labels():
    b = generate_barbell(seed=3)
    g = b.graph
    assert g.num_edges == 50 and g.d_edge == 200 and g.d_node == 0
    centers = np.array([g.edge_features[b.labels == c].mean(0) for c in range(3)])
    nearest = ((g.edge_features[:, None] - centers[None]) ** 2).sum(-1).argmin(1)
    assert np.array_equal(nearest, b.labels)
    _, part, _ = barbell_edges()
    assert np.array_equal(b.labels, part)


def test_barbell_shuffle_preserves_multiset():
    clean = generate_barbell(seed=4)
    noisy = generate_barbell(seed=4, shuffle_p=0.5)
    key = lambda f, y: sorted(map(tuple, np.column_stack([f, y]).round(12)))
    assert key(clean.graph.edge_features, clean.labels) == key(noisy.graph.edge_features, noisy.labels)
    assert noisy.provenance["swaps"] == math.floor(0.5 * (21 * 8 + 21 * 21 + 8 * 21))
    assert not np.array_equal(clean.labels, noisy.labels)


def test_shuffle_swaps_pair_features_and_labels():
    f = np.arange(6.0).reshape(3, 2)
    y = np.array([0, 1, 1])
    f2, y2, m = shuffle_cross_class(f, y, 0.5, np.random.default_rng(0))
    assert m == 1
    moved = np.flatnonzero(y2 != y)
    assert len(moved) == 2 and np.array_equal(f2[moved], f[moved[::-1]])
    with pytest.raises(ConfigError):
        shuffle_cross_class(f, y, 1.5, np.random.default_rng(0))


def test_blob_centers():
    rng = np.random.default_rng(0)
    c = blob_centers(3, 200, rng, "simplex", separation=115.0)
    d = np.linalg.norm(c[:, None] - c[None], axis=-1)
    assert np.allclose(d[~np.eye(3, dtype=bool)], 115.0)
    box = blob_centers(3, 200, rng, "box", center_box=10.0)
    assert np.abs(box).max() <= 10.0
    with pytest.raises(ConfigError):
        blob_centers(3, 2, rng, "simplex")
    with pytest.raises(ConfigError):
        blob_centers(3, 5, rng, "sphere")


def test_barbell_deterministic():
    a, b = generate_barbell(seed=9, shuffle_p=0.3), generate_barbell(seed=9, shuffle_p=0.3)
    assert np.array_equal(a.graph.edge_features, b.graph.edge_features)
