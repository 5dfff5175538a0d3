"""Undirected attributed graph with CSR-style incidence lists."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError

EdgeKey = tuple[int, int]


def canonical(u: int, v: int) -> EdgeKey:
    """Return the single key used for the undirected edge {u, v}."""
    u, v = int(u), int(v)
    return (u, v) if u <= v else (v, u)


@dataclass(frozen=True, eq=False)
class AttributedGraph:
    """Immutable graph; build it with :func:`build_graph`.

    Incidence is stored in CSR form: the edges touching node ``u`` are
    ``inc_edges[indptr[u]:indptr[u + 1]]`` and the matching opposite
    endpoints are ``inc_nodes[...]`` over the same slice.
    """

    node_count: int
    edges: np.ndarray  # (|E|, 2) canonical keys, u < v
    node_features: np.ndarray  # (|V|, d_V)
    edge_features: np.ndarray  # (|E|, d_E)
    indptr: np.ndarray
    inc_edges: np.ndarray
    inc_nodes: np.ndarray
    edge_labels: np.ndarray | None = None
    _index: dict = field(default_factory=dict, repr=False)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def d_node(self) -> int:
        return self.node_features.shape[1]

    @property
    def d_edge(self) -> int:
        return self.edge_features.shape[1]

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def edge_key(self, idx: int) -> EdgeKey:
        u, v = self.edges[idx]
        return int(u), int(v)

    def edge_index(self, u: int, v: int) -> int:
        """Index of edge {u, v}; ``KeyError`` if absent."""
        return self._index[canonical(u, v)]

    def has_edge(self, u: int, v: int) -> bool:
        return canonical(u, v) in self._index

    def edge_subgraph(self, keep: Sequence[int]) -> tuple["AttributedGraph", np.ndarray]:
        """Graph on all nodes restricted to edges ``keep``.

        Returns the subgraph and the original index of each of its edges.
        """
        keep = np.sort(np.asarray(keep, dtype=np.int64))
        labels = None if self.edge_labels is None else self.edge_labels[keep]
        sub = build_graph(
            self.edges[keep],
            self.node_features,
            self.edge_features[keep],
            labels,
            node_count=self.node_count,
        )
        return sub, keep


def build_graph(
    edges: Iterable[Sequence[int]],
    node_features: np.ndarray | None,
    edge_features: np.ndarray,
    labels: Sequence[int] | None = None,
    node_count: int | None = None,
) -> AttributedGraph:
    """Validate inputs and build the incidence structure.

    Edge order (and therefore feature/label row order) is preserved; each
    pair is stored under its canonical key. ``node_features=None`` means
    no node attributes (d_V = 0) and requires ``node_count``.
    """
    if node_features is None:
        if node_count is None:
            raise ValidationError("node_count is required when node_features is None")
        node_features = np.zeros((node_count, 0))
    node_features = np.asarray(node_features, dtype=np.float64)
    edge_features = np.asarray(edge_features, dtype=np.float64)
    if node_features.ndim != 2:
        raise ValidationError(f"node_features must be 2-D, got shape {node_features.shape}")
    if edge_features.ndim != 2:
        raise ValidationError(f"edge_features must be 2-D, got shape {edge_features.shape}")
    if node_count is None:
        node_count = node_features.shape[0]
    if node_features.shape[0] != node_count:
        raise ValidationError(
            f"node_features has {node_features.shape[0]} rows, expected {node_count}"
        )

    pairs = [tuple(e) for e in edges]
    if edge_features.shape[0] != len(pairs):
        raise ValidationError(
            f"edge_features has {edge_features.shape[0]} rows but there are {len(pairs)} edges"
        )

    keys = np.empty((len(pairs), 2), dtype=np.int64)
    index: dict[EdgeKey, int] = {}
    for i, pair in enumerate(pairs):
        if len(pair) != 2:
            raise ValidationError(f"edge row {i}: expected a node pair, got {pair!r}")
        u, v = int(pair[0]), int(pair[1])
        for w in (u, v):
            if not 0 <= w < node_count:
                raise ValidationError(f"edge row {i}: node {w} out of range [0, {node_count})")
        if u == v:
            raise ValidationError(f"edge row {i}: self-loop on node {u}")
        key = canonical(u, v)
        if key in index:
            raise ValidationError(f"edge row {i}: duplicate of edge row {index[key]} {key}")
        index[key] = i
        keys[i] = key

    if labels is not None:
        labels = np.asarray(labels, dtype=np.int64)
        if labels.shape != (len(pairs),):
            raise ValidationError(f"labels has shape {labels.shape}, expected ({len(pairs)},)")
        if len(labels) and labels.min() < 0:
            raise ValidationError("labels must be nonnegative class indices")

    # Each undirected edge contributes one entry to both endpoint lists,
    # ordered by canonical key within a node.
    m = len(pairs)
    owner = np.concatenate([keys[:, 0], keys[:, 1]])
    other = np.concatenate([keys[:, 1], keys[:, 0]])
    eids = np.concatenate([np.arange(m), np.arange(m)])
    order = np.lexsort((keys[eids, 1], keys[eids, 0], owner))
    counts = np.bincount(owner, minlength=node_count)
    indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)

    return AttributedGraph(
        node_count=int(node_count),
        edges=keys,
        node_features=node_features,
        edge_features=edge_features,
        indptr=indptr,
        inc_edges=eids[order].astype(np.int64),
        inc_nodes=other[order].astype(np.int64),
        edge_labels=labels,
        _index=index,
    )


def incident_edges(graph: AttributedGraph, u: int) -> list[tuple[EdgeKey, int]]:
    """All edges touching ``u`` with their opposite endpoint, ordered by key."""
    if not 0 <= u < graph.node_count:
        raise IndexError(f"node {u} out of range [0, {graph.node_count})")
    lo, hi = graph.indptr[u], graph.indptr[u + 1]
    return [
        (graph.edge_key(e), int(w))
        for e, w in zip(graph.inc_edges[lo:hi], graph.inc_nodes[lo:hi])
    ]
