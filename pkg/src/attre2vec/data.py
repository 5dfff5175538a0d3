"""Dataset loading, split generation and the synthetic barbell benchmark."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

from .errors import ConfigError, DatasetIOError, ValidationError
from .graph import AttributedGraph, build_graph

log = logging.getLogger(__name__)


@dataclass
class DatasetBundle:
    graph: AttributedGraph
    labels: np.ndarray
    node_ids: list[str] = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.labels) != self.graph.num_edges:
            raise ValidationError(
                f"{len(self.labels)} labels for {self.graph.num_edges} edges"
            )

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1 if len(self.labels) else 0


@dataclass
class SplitSpec:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    repeat: int = 0

    def keys(self, graph: AttributedGraph, part: str) -> np.ndarray:
        return graph.edges[getattr(self, part)]


# -- CSV reading ---------------------------------------------------------------

def _read_rows(path) -> list[tuple[int, list[str]]]:
    """Non-empty, non-comment rows with their 1-based line numbers."""
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DatasetIOError(f"cannot read {path}: {exc}") from exc
    out = []
    for ln, line in enumerate(lines, start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        out.append((ln, [c.strip() for c in next(csv.reader([line]))]))
    return out


def _read_matrix(path, skip_cols: int = 0) -> tuple[list[str], np.ndarray, list[str]]:
    """Header + float matrix. Returns (leading id column values, matrix, header)."""
    rows = _read_rows(path)
    if not rows:
        raise ValidationError(f"{path}: missing header row")
    header = rows[0][1]
    width = len(header)
    ids, data = [], []
    for ln, r in rows[1:]:
        if len(r) != width:
            raise ValidationError(f"{path}:{ln}: expected {width} fields, got {len(r)}")
        try:
            data.append([float(x) for x in r[skip_cols:]])
        except ValueError as exc:
            raise ValidationError(f"{path}:{ln}: {exc}") from exc
        ids.extend(r[:skip_cols])
    mat = np.array(data, dtype=np.float64).reshape(len(data), width - skip_cols)
    return ids, mat, header


def standardize(matrix: np.ndarray) -> np.ndarray:
    """Per-column zero mean, unit (population) variance; constant columns only centered."""
    mu = matrix.mean(axis=0)
    sd = matrix.std(axis=0)
    sd[sd == 0] = 1.0
    return (matrix - mu) / sd


def load_dataset(
    edges_csv,
    edge_features_csv,
    node_features_csv=None,
    labels_csv=None,
    standardize_edges: bool = True,
) -> DatasetBundle:
    """Load a dataset from CSV files.

    ``edges_csv``: ``src,dst[,label]`` rows (a ``src,dst`` header is
    optional). ``edge_features_csv``: header, then one row per edge in the
    edge file's order. ``node_features_csv``: header starting with ``id``,
    then one row per node; its order defines the dense node ids. Without it
    nodes are numbered by first appearance in the edge file.
    ``labels_csv``: header, then one label per edge.
    """
    rows = _read_rows(edges_csv)
    if rows and rows[0][1][:2] == ["src", "dst"]:
        rows = rows[1:]

    if node_features_csv is not None:
        node_ids, node_feats, _ = _read_matrix(node_features_csv, skip_cols=1)
        if len(set(node_ids)) != len(node_ids):
            raise ValidationError(f"{node_features_csv}: duplicate node ids")
    else:
        node_ids, node_feats = [], None
        seen = set()
        for _, r in rows:
            for x in r[:2]:
                if x not in seen:
                    seen.add(x)
                    node_ids.append(x)
    id_map = {x: i for i, x in enumerate(node_ids)}
    if node_feats is None:
        node_feats = np.zeros((len(node_ids), 0))

    pairs, inline_labels = [], []
    for ln, r in rows:
        if len(r) not in (2, 3):
            raise ValidationError(f"{edges_csv}:{ln}: expected src,dst[,label], got {len(r)} fields")
        try:
            pairs.append((id_map[r[0]], id_map[r[1]]))
        except KeyError as exc:
            raise ValidationError(f"{edges_csv}:{ln}: unknown node id {exc.args[0]!r}") from exc
        if len(r) == 3:
            try:
                inline_labels.append(int(r[2]))
            except ValueError as exc:
                raise ValidationError(f"{edges_csv}:{ln}: bad label {r[2]!r}") from exc

    _, edge_feats, _ = _read_matrix(edge_features_csv)
    if len(edge_feats) != len(pairs):
        raise ValidationError(
            f"{edge_features_csv}: {len(edge_feats)} feature rows but {edges_csv} has {len(pairs)} edges"
        )

    if labels_csv is not None:
        _, lab, _ = _read_matrix(labels_csv)
        if lab.shape[1] != 1 or len(lab) != len(pairs):
            raise ValidationError(
                f"{labels_csv}: expected {len(pairs)} rows x 1 column, got {lab.shape}"
            )
        labels = lab[:, 0].astype(np.int64)
    elif inline_labels:
        if len(inline_labels) != len(pairs):
            raise ValidationError(f"{edges_csv}: label column present on only some rows")
        labels = np.array(inline_labels, np.int64)
    else:
        raise ValidationError(f"no edge labels: give labels_csv or a label column in {edges_csv}")

    if standardize_edges and len(edge_feats):
        edge_feats = standardize(edge_feats)
    graph = build_graph(pairs, node_feats, edge_feats, labels, node_count=len(node_ids))
    prov = {
        "edges": str(edges_csv),
        "edge_features": str(edge_features_csv),
        "node_features": None if node_features_csv is None else str(node_features_csv),
        "labels": None if labels_csv is None else str(labels_csv),
        "standardized": bool(standardize_edges),
    }
    return DatasetBundle(graph, labels, list(node_ids), prov)


def derive_edge_labels(edges, node_labels, n_classes: int | None = None) -> np.ndarray:
    """Shared endpoint class, or ``n_classes`` for cross-class edges."""
    node_labels = np.asarray(node_labels)
    if node_labels.dtype.kind == "f" and np.isnan(node_labels).any():
        raise ValidationError(f"unlabeled nodes: {np.flatnonzero(np.isnan(node_labels)).tolist()[:10]}")
    node_labels = node_labels.astype(np.int64)
    if (node_labels < 0).any():
        raise ValidationError(f"unlabeled nodes: {np.flatnonzero(node_labels < 0).tolist()[:10]}")
    if n_classes is None:
        n_classes = int(node_labels.max()) + 1
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    a, b = node_labels[e[:, 0]], node_labels[e[:, 1]]
    return np.where(a == b, a, n_classes)


# -- splits -------------------------------------------------------------------

def make_splits(
    labels,
    per_class: int = 20,
    n_val: int = 1000,
    n_test: int = 1000,
    repeats: int = 10,
    seed: int = 0,
) -> list[SplitSpec]:
    """Train sets of ``per_class`` edges per class plus random val/test edges.

    ``labels`` may be a :class:`DatasetBundle`. When the graph is too small
    for the requested sizes, all three shrink by the same factor (at least
    one training edge per class) and a warning is logged.
    """
    if isinstance(labels, DatasetBundle):
        labels = labels.labels
    labels = np.asarray(labels, dtype=np.int64)
    n = len(labels)
    classes = np.arange(labels.max() + 1) if n else np.zeros(0, np.int64)
    counts = np.bincount(labels, minlength=len(classes))
    empty = classes[counts == 0]
    if len(empty):
        raise ValidationError(f"classes with no edges: {empty.tolist()}")

    needed = per_class * len(classes) + n_val + n_test
    if needed > n:
        scale = n / needed
        new = (max(1, math.floor(per_class * scale)), math.floor(n_val * scale), math.floor(n_test * scale))
        log.warning(
            "only %d edges for %d requested; shrinking (per_class, n_val, n_test) %s -> %s",
            n, needed, (per_class, n_val, n_test), new,
        )
        per_class, n_val, n_test = new

    out = []
    for r in range(repeats):
        rng = np.random.default_rng([seed, r])
        train = []
        for c in classes:
            members = np.flatnonzero(labels == c)
            take = min(per_class, len(members))
            if take < per_class:
                log.warning("class %d has only %d edges (< %d)", c, len(members), per_class)
            train.append(rng.choice(members, take, replace=False))
        train = np.sort(np.concatenate(train))
        rest = rng.permutation(np.setdiff1d(np.arange(n), train))
        val = np.sort(rest[:n_val])
        test = np.sort(rest[n_val : n_val + n_test])
        out.append(SplitSpec(train, val, test, r))
    return out


# -- barbell benchmark -----------------------------------------------------

def barbell_edges(clique_size: int = 7, path_nodes: int = 7) -> tuple[list[tuple[int, int]], np.ndarray, int]:
    """Two cliques joined by a path through ``path_nodes`` extra nodes.

    Returns (edges, part id per edge: 0 first clique / 1 path / 2 second
    clique, node count). Clique edges number c(c-1)/2 each, the path
    ``path_nodes + 1``.
    """
    c = clique_size
    a = list(range(c))
    p = list(range(c, c + path_nodes))
    b = list(range(c + path_nodes, 2 * c + path_nodes))
    edges, part = [], []
    for u, v in combinations(a, 2):
        edges.append((u, v))
        part.append(0)
    chain = [a[-1]] + p + [b[0]]
    for u, v in zip(chain[:-1], chain[1:]):
        edges.append((u, v))
        part.append(1)
    for u, v in combinations(b, 2):
        edges.append((u, v))
        part.append(2)
    return edges, np.array(part, np.int64), 2 * c + path_nodes


def blob_centers(
    n_blobs: int,
    dim: int,
    rng: np.random.Generator,
    geometry: str = "box",
    center_box: float = 10.0,
    separation: float = 10.0,
) -> np.ndarray:
    """Blob centers.

    ``"box"`` draws each coordinate uniformly from ``[-center_box,
    center_box]``; ``"simplex"`` places the centers on scaled basis vectors
    with pairwise distance ``separation``.
    """
    if geometry == "box":
        return rng.uniform(-center_box, center_box, (n_blobs, dim))
    if geometry == "simplex":
        if dim < n_blobs:
            raise ConfigError(f"feature_dim {dim} < number of blobs {n_blobs}", "feature_dim")
        centers = np.zeros((n_blobs, dim))
        centers[np.arange(n_blobs), np.arange(n_blobs)] = separation / math.sqrt(2)
        return centers
    raise ConfigError(f"unknown center geometry {geometry!r}", "center_geometry")


def shuffle_cross_class(features: np.ndarray, labels: np.ndarray, p: float, rng: np.random.Generator):
    """Swap features and labels of floor(p * #cross-class pairs) random pairs.

    Pairs are enumerated once from the original labels; the sampled pairs
    are swapped in the sampled order.
    """
    if not 0.0 <= p <= 1.0:
        raise ConfigError(f"shuffle_p must lie in [0, 1], got {p}", "shuffle_p")
    features, labels = features.copy(), labels.copy()
    i, j = np.triu_indices(len(labels), k=1)
    cross = labels[i] != labels[j]
    i, j = i[cross], j[cross]
    m = math.floor(p * len(i))
    for t in rng.choice(len(i), m, replace=False):
        a, b = i[t], j[t]
        features[[a, b]] = features[[b, a]]
        labels[[a, b]] = labels[[b, a]]
    return features, labels, m


def generate_barbell(
    clique_size: int = 7,
    path_nodes: int = 7,
    feature_dim: int = 200,
    blob_spread: float = 1.0,
    shuffle_p: float = 0.0,
    seed: int = 0,
    center_geometry: str = "simplex",
    center_box: float = 10.0,
    center_separation: float = 115.0,
) -> DatasetBundle:
    """Barbell graph whose three parts carry features from three Gaussian blobs.

    Blob ``i`` feeds the edges of part ``i`` (first clique, path, second
    clique) and its id is the edge label. ``blob_spread`` is the per-axis
    standard deviation. The default centers are pairwise 115 apart, about
    the expected distance between centers drawn uniformly from a +-10 box
    in 200 dimensions. See :func:`blob_centers` for the center options.
    """
    if not 0.0 <= shuffle_p <= 1.0:
        raise ConfigError(f"shuffle_p must lie in [0, 1], got {shuffle_p}", "shuffle_p")
    if clique_size < 2 or path_nodes < 0:
        raise ConfigError("clique_size must be >= 2 and path_nodes >= 0", "clique_size")
    edges, part, n_nodes = barbell_edges(clique_size, path_nodes)
    rng = np.random.default_rng(seed)
    centers = blob_centers(3, feature_dim, rng, center_geometry, center_box, center_separation)
    feats = centers[part] + rng.normal(0.0, blob_spread, (len(edges), feature_dim))
    feats, labels, n_swaps = shuffle_cross_class(feats, part, shuffle_p, rng)
    graph = build_graph(edges, None, feats, labels, node_count=n_nodes)
    prov = {
        "generator": "barbell",
        "clique_size": clique_size,
        "path_nodes": path_nodes,
        "feature_dim": feature_dim,
        "blob_spread": blob_spread,
        "center_geometry": center_geometry,
        "center_box": center_box,
        "center_separation": center_separation,
        "shuffle_p": shuffle_p,
        "swaps": n_swaps,
        "seed": seed,
    }
    return DatasetBundle(graph, labels, [str(i) for i in range(n_nodes)], prov)
