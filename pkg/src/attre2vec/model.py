"""The AttrE2vec network: neighborhood summaries, attention encoder, decoder, losses."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .aggregation import AGGREGATORS, GruAggParams, gru_summaries, linear_summaries
from .autodiff import Tensor
from .errors import ConfigError, ValidationError
from .graph import AttributedGraph, canonical
from .optim import ParameterStore
from .walks import WalkConfig, WalkTable, walk_table


@dataclass(frozen=True)
class ModelConfig:
    d_edge: int
    d_node: int = 0
    dim: int = 64
    aggregator: str = "avg"

    def __post_init__(self):
        if self.aggregator not in AGGREGATORS:
            raise ConfigError(
                f"aggregator must be one of {AGGREGATORS}, got {self.aggregator!r}", "aggregator"
            )
        if self.aggregator == "concat_gru" and self.d_node == 0:
            raise ConfigError("concat_gru needs node features (d_V > 0)", "aggregator")
        if self.dim < 1 or self.d_edge < 1:
            raise ConfigError("dim and d_edge must be positive", "dim")

    @property
    def decoder_widths(self) -> tuple[int, int, int, int]:
        return (self.dim, 2 * self.dim, math.ceil(self.d_edge / 2), self.d_edge)


@dataclass
class EdgeEmbedding:
    h: np.ndarray
    attention: np.ndarray  # weights of (f_uv, S_u, S_v)


class EmbeddingSet:
    """Embeddings of a list of edges, stored as two dense arrays."""

    def __init__(self, keys: np.ndarray, h: np.ndarray, attention: np.ndarray):
        self.keys = keys
        self.h = h
        self.attention = attention

    def __len__(self) -> int:
        return len(self.h)

    def __getitem__(self, i: int) -> EdgeEmbedding:
        return EdgeEmbedding(self.h[i], self.attention[i])


def _uniform(rng, fan_in, shape):
    bound = 1 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, shape)


def init_params(cfg: ModelConfig, seed: int = 0) -> ParameterStore:
    """Fresh parameters; matrices uniform in +-1/sqrt(fan_in), zero biases."""
    rng = np.random.default_rng(seed)
    p = ParameterStore()
    dE, d = cfg.d_edge, cfg.dim
    p.add("enc.W_in", _uniform(rng, dE, (dE, dE)))
    p.add("enc.b_in", np.zeros(dE))
    p.add("enc.w_score", _uniform(rng, dE, (dE, 1)))
    p.add("enc.b_score", np.zeros(1))
    p.add("enc.W_out", _uniform(rng, dE, (dE, d)))
    p.add("enc.b_out", np.zeros(d))
    widths = cfg.decoder_widths
    for i, (a, b) in enumerate(zip(widths[:-1], widths[1:]), start=1):
        p.add(f"dec.W{i}", _uniform(rng, a, (a, b)))
        p.add(f"dec.b{i}", np.zeros(b))
    if cfg.aggregator in ("gru", "concat_gru"):
        d_in = dE + (cfg.d_node if cfg.aggregator == "concat_gru" else 0)
        gru = GruAggParams.init(d_in, dE, rng)
        for name, t in gru.items():
            p.add(f"agg.{name}", t.value)
    return p


def gru_view(params: ParameterStore) -> GruAggParams:
    out = GruAggParams()
    for name, t in params.items():
        if name.startswith("agg."):
            out[name[4:]] = t
    return out


# -- network pieces ----------------------------------------------------------

def encode_batch(f: Tensor | np.ndarray, S: Tensor | np.ndarray, params: ParameterStore):
    """Encode ``n`` edges from features ``(n, d_E)`` and summaries ``(n, 2, d_E)``.

    The three inputs share one ReLU transform and one scalar scorer; the
    softmax over the three scores weights the transformed inputs before the
    projection to ``d``. Returns (h ``(n, d)``, attention ``(n, 3)``).
    """
    f, S = ad.as_tensor(f), ad.as_tensor(S)
    n, d_e = f.shape
    if S.shape != (n, 2, d_e) or params["enc.W_in"].shape[0] != d_e:
        raise ValidationError(
            f"encoder input widths disagree: f {f.shape}, summaries {S.shape}, "
            f"encoder expects {params['enc.W_in'].shape[0]}"
        )
    x = ad.concat([ad.reshape(f, (n, 1, d_e)), S], axis=1)
    t = ad.relu(ad.affine(x, params["enc.W_in"], params["enc.b_in"]))
    scores = ad.reshape(ad.affine(t, params["enc.w_score"], params["enc.b_score"]), (n, 3))
    att = ad.softmax(scores, axis=1)
    mixed = ad.sum(t * ad.reshape(att, (n, 3, 1)), axis=1)
    h = ad.affine(mixed, params["enc.W_out"], params["enc.b_out"])
    return h, att


def decode_batch(h: Tensor | np.ndarray, params: ParameterStore) -> Tensor:
    x = ad.relu(ad.affine(h, params["dec.W1"], params["dec.b1"]))
    x = ad.relu(ad.affine(x, params["dec.W2"], params["dec.b2"]))
    return ad.affine(x, params["dec.W3"], params["dec.b3"])


def encode(f_uv, S_u, S_v, params: ParameterStore) -> EdgeEmbedding:
    f = np.asarray(f_uv, dtype=np.float64)
    su, sv = (np.asarray(getattr(s, "vector", s), dtype=np.float64) for s in (S_u, S_v))
    if not (f.shape == su.shape == sv.shape) or f.ndim != 1:
        raise ValidationError(f"encoder inputs must be equal-width vectors: {f.shape}, {su.shape}, {sv.shape}")
    h, att = encode_batch(f[None], np.stack([su, sv])[None], params)
    return EdgeEmbedding(h.value[0], att.value[0])


def decode(h, params: ParameterStore) -> np.ndarray:
    h = np.asarray(h, dtype=np.float64)
    if h.shape[-1] != params["dec.W1"].shape[0]:
        raise ValidationError(f"decoder expects width {params['dec.W1'].shape[0]}, got {h.shape[-1]}")
    return decode_batch(h, params).value


# -- losses ------------------------------------------------------------------

def cosine_structural_loss(h, positives, negatives) -> Tensor:
    """Mean over the batch of sum(1 - cos(h, h+)) + sum(cos(h, h-)).

    Shapes: ``h`` (..., d), ``positives`` (..., P, d), ``negatives``
    (..., N, d); leading axes are the batch.
    """
    h, pos, neg = ad.as_tensor(h), ad.as_tensor(positives), ad.as_tensor(negatives)
    anchor = ad.reshape(h, h.shape[:-1] + (1, h.shape[-1]))
    pull = ad.sum(ad.cosine(anchor, pos), axis=-1)
    push = ad.sum(ad.cosine(anchor, neg), axis=-1)
    per_edge = ad.sub(float(pos.shape[-2]), pull) + push
    return ad.mean(per_edge)


def mse_reconstruction_loss(h, f, params: ParameterStore) -> Tensor:
    """Batch mean of the squared reconstruction error summed over feature dims."""
    h, f = ad.as_tensor(h), ad.as_tensor(f)
    if h.shape[0] == 0:
        raise ValidationError("empty batch")
    err = ad.square_diff(decode_batch(h, params), f)
    return ad.mean(ad.sum(err, axis=-1))


def total_loss(l_cos, l_mse, lam: float):
    if not 0.0 <= lam <= 1.0:
        raise ConfigError(f"lambda must lie in [0, 1], got {lam}", "lam")
    return lam * l_cos + (1.0 - lam) * l_mse


# -- summaries and inference -------------------------------------------------

def neighborhood_summaries(
    cfg: ModelConfig, params: ParameterStore, graph: AttributedGraph, table: WalkTable
):
    """Summaries ``(n, 2, d_E)`` of the walks in ``table`` (taken on ``graph``)."""
    if cfg.aggregator in ("avg", "exp"):
        return linear_summaries(graph.edge_features, table, cfg.aggregator)
    nodes = graph.node_features if cfg.aggregator == "concat_gru" else None
    return gru_summaries(graph.edge_features, table, gru_view(params), nodes)


def resolve_edges(graph: AttributedGraph, edges) -> tuple[np.ndarray, np.ndarray]:
    """Canonical keys and graph indices of ``edges`` (pairs or indices)."""
    arr = np.asarray(edges, dtype=np.int64)
    if arr.ndim == 1:
        if len(arr) and (arr.min() < 0 or arr.max() >= graph.num_edges):
            raise KeyError(f"edge index out of range [0, {graph.num_edges})")
        return graph.edges[arr], arr
    arr = arr.reshape(-1, 2)
    idx = np.empty(len(arr), np.int64)
    for i, (u, v) in enumerate(arr):
        for w in (u, v):
            if not 0 <= w < graph.node_count:
                raise KeyError(f"unknown node {int(w)}")
        if not graph.has_edge(u, v):
            raise KeyError(f"edge {canonical(u, v)} has no features in the graph")
        idx[i] = graph.edge_index(u, v)
    return graph.edges[idx], idx


def infer_embeddings(
    graph: AttributedGraph,
    edges,
    walk_cfg: WalkConfig,
    model_cfg: ModelConfig,
    params: ParameterStore,
    tag: int = 0,
    batch_size: int = 1024,
) -> EmbeddingSet:
    """Embed ``edges`` (pairs or edge indices of ``graph``) without training.

    Per edge: k walks from each endpoint on ``graph``, walk and neighborhood
    aggregation, then the encoder. Deterministic in ``walk_cfg.seed`` and
    ``tag``.
    """
    keys, idx = resolve_edges(graph, edges)
    hs, atts = [np.zeros((0, model_cfg.dim))], [np.zeros((0, 3))]
    for lo in range(0, len(idx), batch_size):
        sl = slice(lo, lo + batch_size)
        table = walk_table(graph, keys[sl], walk_cfg, tag)
        S = neighborhood_summaries(model_cfg, params, graph, table)
        h, att = encode_batch(graph.edge_features[idx[sl]], S, params)
        hs.append(h.value)
        atts.append(att.value)
    return EmbeddingSet(keys, np.concatenate(hs), np.concatenate(atts))


class AttrE2vec:
    """Bundles a model config with its parameters."""

    def __init__(self, cfg: ModelConfig, seed: int = 0, params: ParameterStore | None = None):
        self.cfg = cfg
        self.params = params if params is not None else init_params(cfg, seed)

    def embed(self, graph: AttributedGraph, edges, walk_cfg: WalkConfig, tag: int = 0) -> EmbeddingSet:
        return infer_embeddings(graph, edges, walk_cfg, self.cfg, self.params, tag)
