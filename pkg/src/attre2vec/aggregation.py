"""Walk aggregators (Agg_w) and the neighborhood mean (Agg_n).

The single-walk functions take a ``(L', d)`` feature sequence in walk
order and return a :class:`WalkSummary`. The ``*_summaries`` functions do
the same for every walk in a :class:`~attre2vec.walks.WalkTable` at once
and already average over the k walks of each endpoint.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, ValidationError
from .walks import WalkTable

AGGREGATORS = ("avg", "exp", "gru", "concat_gru")


@dataclass
class WalkSummary:
    vector: np.ndarray
    degenerate: bool = False


NeighborhoodSummary = WalkSummary


def _as_rows(walk_features) -> np.ndarray:
    x = np.asarray(walk_features, dtype=np.float64)
    if x.ndim != 2:
        raise ValidationError(f"walk features must be 2-D (steps, dim), got {x.shape}")
    return x


def position_weights(kind: str, length: int) -> np.ndarray:
    """Per-step weights of the linear aggregators, prefactor included."""
    if length == 0:
        return np.zeros(0)
    if kind == "avg":
        return np.full(length, 1.0 / length)
    if kind == "exp":
        # 1/L' is kept even though the e^{-n} terms do not sum to one
        return np.exp(-np.arange(1, length + 1, dtype=np.float64)) / length
    raise ConfigError(f"no position weights for aggregator {kind!r}", "aggregator")


def aggregate_walk_avg(walk_features) -> WalkSummary:
    x = _as_rows(walk_features)
    if len(x) == 0:
        return WalkSummary(np.zeros(x.shape[1]), degenerate=True)
    return WalkSummary(position_weights("avg", len(x)) @ x)


def aggregate_walk_exp(walk_features) -> WalkSummary:
    x = _as_rows(walk_features)
    if len(x) == 0:
        return WalkSummary(np.zeros(x.shape[1]), degenerate=True)
    return WalkSummary(position_weights("exp", len(x)) @ x)


class GruAggParams(dict):
    """Named GRU weights: W* are (input, hidden), U* are (hidden, hidden)."""

    @property
    def input_dim(self) -> int:
        return self["Wz"].shape[0]

    @property
    def hidden_dim(self) -> int:
        return self["Uz"].shape[0]

    @classmethod
    def init(cls, input_dim: int, hidden_dim: int, rng: np.random.Generator, prefix: str = ""):
        """Uniform in +-1/sqrt(fan_in) for matrices, zero biases."""
        out = cls()
        for gate in "zrc":
            bound = 1 / np.sqrt(input_dim) if input_dim else 0.0
            out[f"W{gate}"] = Tensor(rng.uniform(-bound, bound, (input_dim, hidden_dim)), True, f"{prefix}W{gate}")
            bound = 1 / np.sqrt(hidden_dim)
            out[f"U{gate}"] = Tensor(rng.uniform(-bound, bound, (hidden_dim, hidden_dim)), True, f"{prefix}U{gate}")
            out[f"b{gate}"] = Tensor(np.zeros(hidden_dim), True, f"{prefix}b{gate}")
        return out

    @classmethod
    def zeros(cls, input_dim: int, hidden_dim: int):
        out = cls()
        for gate in "zrc":
            out[f"W{gate}"] = Tensor(np.zeros((input_dim, hidden_dim)), True)
            out[f"U{gate}"] = Tensor(np.zeros((hidden_dim, hidden_dim)), True)
            out[f"b{gate}"] = Tensor(np.zeros(hidden_dim), True)
        return out


def run_gru(sequence: Tensor | np.ndarray, params: GruAggParams) -> Tensor:
    """Feed ``sequence[..., t, :]`` for t = 0, 1, ... from a zero state; return the last state."""
    seq = ad.as_tensor(sequence)
    if seq.shape[-1] != params.input_dim:
        raise ValidationError(
            f"GRU expects input width {params.input_dim}, got {seq.shape[-1]}"
        )
    h = Tensor(np.zeros(seq.shape[:-2] + (params.hidden_dim,)))
    for t in range(seq.shape[-2]):
        h = ad.gru_cell(ad.take(seq, (Ellipsis, t, slice(None))), h, params)
    return h


def aggregate_walk_gru(walk_features, params: GruAggParams) -> WalkSummary:
    """GRU over the walk from its last edge back to its first."""
    x = _as_rows(walk_features)
    if x.shape[1] != params.input_dim:
        raise ValidationError(f"GRU expects input width {params.input_dim}, got {x.shape[1]}")
    if len(x) == 0:
        return WalkSummary(np.zeros(params.hidden_dim), degenerate=True)
    return WalkSummary(run_gru(x[::-1], params).value)


def aggregate_walk_concat_gru(edge_features, node_features_along_walk, params: GruAggParams) -> WalkSummary:
    """As :func:`aggregate_walk_gru` on per-step ``f_n ⊕ m_n``.

    ``node_features_along_walk[n]`` belongs to the node the n-th edge
    leaves from.
    """
    f = _as_rows(edge_features)
    m = _as_rows(node_features_along_walk)
    if len(f) != len(m):
        raise ValidationError(f"{len(f)} edge rows but {len(m)} node rows along the walk")
    if m.shape[1] == 0:
        raise ConfigError("concat_gru needs node features (d_V > 0)", "aggregator")
    return aggregate_walk_gru(np.hstack([f, m]), params)


def aggregate_neighborhood(summaries, width: int | None = None) -> NeighborhoodSummary:
    """Mean of the walk summaries; an empty list gives a flagged zero vector of ``width``."""
    vecs = [s.vector if isinstance(s, WalkSummary) else np.asarray(s, dtype=np.float64) for s in summaries]
    if not vecs:
        if width is None:
            raise ValidationError("empty summary list needs an explicit width")
        return NeighborhoodSummary(np.zeros(width), degenerate=True)
    widths = {len(v) for v in vecs}
    if len(widths) != 1:
        raise ValidationError(f"summaries have mixed widths {sorted(widths)}")
    degenerate = all(getattr(s, "degenerate", False) for s in summaries)
    return NeighborhoodSummary(np.mean(vecs, axis=0), degenerate=degenerate)


# -- batched paths used by the model --------------------------------------

def linear_summaries(edge_features: np.ndarray, table: WalkTable, kind: str) -> np.ndarray:
    """Neighborhood summaries ``(n, 2, d_E)`` for the avg/exp aggregators.

    Each endpoint's summary is a fixed linear combination of edge feature
    rows, so all of them are one sparse product.
    """
    n, _, k, L = table.edge_ids.shape
    w = position_weights(kind, L) / k
    rows = np.repeat(np.arange(2 * n), k * L)
    data = np.tile(w, 2 * n * k)
    data[np.repeat(table.empty.ravel(), k * L)] = 0.0
    mat = sp.csr_matrix(
        (data, (rows, table.edge_ids.ravel())), shape=(2 * n, edge_features.shape[0])
    )
    return np.asarray(mat @ edge_features).reshape(n, 2, -1)


def gru_summaries(
    edge_features: np.ndarray,
    table: WalkTable,
    params: GruAggParams,
    node_features: np.ndarray | None = None,
) -> Tensor:
    """Neighborhood summaries ``(n, 2, d_E)`` for gru / concat_gru (differentiable)."""
    n, _, k, L = table.edge_ids.shape
    seq = edge_features[table.edge_ids[..., ::-1]]  # (n, 2, k, L, d_E), last edge first
    if node_features is not None:
        if node_features.shape[1] == 0:
            raise ConfigError("concat_gru needs node features (d_V > 0)", "aggregator")
        leaving = table.nodes[..., :L][..., ::-1]
        seq = np.concatenate([seq, node_features[leaving]], axis=-1)
    h = run_gru(seq.reshape(n * 2 * k, L, -1), params)
    s = ad.mean(ad.reshape(h, (n, 2, k, -1)), axis=2)
    if table.empty.any():
        s = s * (~table.empty)[..., None].astype(np.float64)
    return s
