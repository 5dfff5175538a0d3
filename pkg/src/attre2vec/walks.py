"""Uniform edge random walks.

Every walk is a connected sequence of edges; at each step the next edge is
drawn uniformly from all edges incident to the current node (immediate
backtracking allowed). A walk from an isolated node is empty.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .graph import AttributedGraph, EdgeKey


@dataclass(frozen=True)
class WalkConfig:
    k: int = 16
    L: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}", "k")
        if self.L < 1:
            raise ConfigError(f"L must be >= 1, got {self.L}", "L")


@dataclass(frozen=True)
class Walk:
    start: int
    edge_ids: np.ndarray  # (L',) edge indices in walk order
    nodes: np.ndarray  # (L' + 1,) visited nodes, nodes[0] == start

    def __len__(self) -> int:
        return len(self.edge_ids)

    def steps(self, graph: AttributedGraph) -> list[tuple[EdgeKey, int]]:
        """(edge key, arriving node) per step."""
        return [(graph.edge_key(e), int(n)) for e, n in zip(self.edge_ids, self.nodes[1:])]


def walk_rng(seed: int, tag: int, key: EdgeKey, endpoint: int) -> np.random.Generator:
    """Independent stream for the walks of one endpoint of one edge.

    Derived from the edge key rather than its index so the same edge gets
    the same walks in a subgraph and in the full graph.
    """
    return np.random.default_rng([int(seed), int(tag), int(key[0]), int(key[1]), int(endpoint)])


def _advance(graph: AttributedGraph, cur: np.ndarray, rng: np.random.Generator):
    deg = graph.indptr[cur + 1] - graph.indptr[cur]
    pick = np.floor(rng.random(len(cur)) * deg).astype(np.int64)
    slot = graph.indptr[cur] + pick
    return graph.inc_edges[slot], graph.inc_nodes[slot]


def edge_random_walk(graph: AttributedGraph, start: int, L: int, rng: np.random.Generator) -> Walk:
    if not 0 <= start < graph.node_count:
        raise IndexError(f"node {start} out of range [0, {graph.node_count})")
    edges, nodes = walk_batch(graph, start, 1, L, rng)
    return Walk(int(start), edges[0], nodes[0])


def walk_batch(
    graph: AttributedGraph, start: int, k: int, L: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """k walks from ``start`` advanced in lockstep.

    Returns edge ids ``(k, L)`` and nodes ``(k, L + 1)``; both have zero
    steps when ``start`` is isolated. Each step consumes one uniform draw
    per walk.
    """
    if graph.indptr[start + 1] == graph.indptr[start]:
        return np.zeros((k, 0), np.int64), np.full((k, 1), start, np.int64)
    nodes = np.empty((k, L + 1), np.int64)
    edges = np.empty((k, L), np.int64)
    nodes[:, 0] = start
    for t in range(L):
        edges[:, t], nodes[:, t + 1] = _advance(graph, nodes[:, t], rng)
    return edges, nodes


def sample_neighborhood_walks(
    graph: AttributedGraph, u: int, cfg: WalkConfig, rng: np.random.Generator
) -> list[Walk]:
    if not 0 <= u < graph.node_count:
        raise IndexError(f"node {u} out of range [0, {graph.node_count})")
    edges, nodes = walk_batch(graph, u, cfg.k, cfg.L, rng)
    return [Walk(int(u), edges[i], nodes[i]) for i in range(cfg.k)]


@dataclass
class WalkTable:
    """Walks for both endpoints of a set of edges.

    ``edge_ids[i, s]`` holds the ``(k, L)`` walk edges of endpoint ``s``
    (0 = smaller node id) of edge ``i``; ``empty[i, s]`` marks an isolated
    endpoint, whose rows are meaningless.
    """

    edge_ids: np.ndarray  # (n, 2, k, L)
    nodes: np.ndarray  # (n, 2, k, L + 1)
    empty: np.ndarray  # (n, 2) bool

    def subset(self, rows) -> "WalkTable":
        return WalkTable(self.edge_ids[rows], self.nodes[rows], self.empty[rows])

    def pool(self, i: int) -> np.ndarray:
        """Distinct edge ids visited by the 2k walks of edge ``i``."""
        rows = [self.edge_ids[i, s].ravel() for s in (0, 1) if not self.empty[i, s]]
        if not rows:
            return np.zeros(0, np.int64)
        return np.unique(np.concatenate(rows))


def walk_table(
    graph: AttributedGraph,
    keys: np.ndarray,
    cfg: WalkConfig,
    tag: int = 0,
) -> WalkTable:
    """Sample k walks of length L from both endpoints of every edge in ``keys``.

    ``keys`` are canonical (u, v) pairs; their endpoints must exist in
    ``graph`` but the edges themselves need not.
    """
    keys = np.asarray(keys, dtype=np.int64).reshape(-1, 2)
    n = len(keys)
    edge_ids = np.zeros((n, 2, cfg.k, cfg.L), np.int64)
    nodes = np.zeros((n, 2, cfg.k, cfg.L + 1), np.int64)
    empty = np.zeros((n, 2), bool)
    for i, (u, v) in enumerate(keys):
        for s, start in enumerate((u, v)):
            if not 0 <= start < graph.node_count:
                raise KeyError(f"unknown node {int(start)}")
            rng = walk_rng(cfg.seed, tag, (u, v), s)
            e, w = walk_batch(graph, int(start), cfg.k, cfg.L, rng)
            if e.shape[1] == 0:
                empty[i, s] = True
                nodes[i, s, :, 0] = start
            else:
                edge_ids[i, s], nodes[i, s] = e, w
    return WalkTable(edge_ids, nodes, empty)
