"""Minibatch training with walk-based positive/negative sampling and early stopping."""
from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from .aggregation import AGGREGATORS
from .data import SplitSpec
from .errors import ConfigError, NumericFault, SkipEdge, ValidationError
from .evaluation import classification_auc
from .graph import AttributedGraph
from .model import (
    AttrE2vec,
    ModelConfig,
    cosine_structural_loss,
    encode_batch,
    infer_embeddings,
    mse_reconstruction_loss,
    neighborhood_summaries,
    total_loss,
)
from .optim import AdamW
from .walks import WalkConfig, walk_table

log = logging.getLogger(__name__)


class UnusableGraph(ValidationError):
    """No training edge had both a positive and a negative pool."""


@dataclass(frozen=True)
class TrainConfig:
    k: int = 16
    L: int = 8
    d: int = 64
    lam: float = 0.5
    n_pos: int = 5
    n_neg: int = 10
    lr: float = 1e-3
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 0.01
    patience: int = 15
    max_epochs: int = 100
    batch_size: int = 64
    aggregator: str = "avg"
    seed: int = 0
    l2_strength: float = 1.0
    transductive: bool = False

    def __post_init__(self):
        checks = [
            (0.0 <= self.lam <= 1.0, "lam", "must lie in [0, 1]"),
            (self.n_pos >= 1, "n_pos", "must be >= 1"),
            (self.n_neg >= 1, "n_neg", "must be >= 1"),
            (self.patience >= 1, "patience", "must be >= 1"),
            (self.max_epochs >= 1, "max_epochs", "must be >= 1"),
            (self.batch_size >= 1, "batch_size", "must be >= 1"),
            (self.k >= 1, "k", "must be >= 1"),
            (self.L >= 1, "L", "must be >= 1"),
            (self.d >= 1, "d", "must be >= 1"),
            (self.lr > 0, "lr", "must be positive"),
            (self.aggregator in AGGREGATORS, "aggregator", f"must be one of {AGGREGATORS}"),
        ]
        for ok, name, msg in checks:
            if not ok:
                raise ConfigError(f"{name} {msg}, got {getattr(self, name)!r}", name)

    @property
    def walk(self) -> WalkConfig:
        return WalkConfig(self.k, self.L, self.seed)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["betas"] = list(self.betas)
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "TrainConfig":
        known = cls.__dataclass_fields__
        unknown = set(raw) - set(known)
        if unknown:
            raise ConfigError(f"unknown training options: {sorted(unknown)}", sorted(unknown)[0])
        raw = dict(raw)
        if "betas" in raw:
            raw["betas"] = tuple(raw["betas"])
        return cls(**raw)


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    l_cos: float
    l_mse: float
    val_auc: float
    skipped: int


@dataclass
class RunReport:
    config: dict
    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    best_val_auc: float = float("nan")
    wall_clock: float = 0.0
    checkpoint: str | None = None

    CSV_FIELDS = ("epoch", "loss", "l_cos", "l_mse", "val_auc", "skipped")

    def to_csv(self) -> str:
        """Per-epoch trace; floats written with round-trip precision, no timing."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_FIELDS)
        for r in self.epochs:
            w.writerow([r.epoch, repr(r.loss), repr(r.l_cos), repr(r.l_mse), repr(r.val_auc), r.skipped])
        return buf.getvalue()


# -- sampling -------------------------------------------------------------------

def _draw(candidates: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    replace = len(candidates) < n
    return rng.choice(candidates, n, replace=replace)


def sample_positives(anchor: int, pool: np.ndarray, n_pos: int, rng: np.random.Generator) -> np.ndarray:
    """``n_pos`` edges from the anchor's walk pool, anchor excluded.

    Without replacement unless the pool is smaller than ``n_pos``.
    """
    cand = pool[pool != anchor]
    if len(cand) == 0:
        raise SkipEdge(f"edge {anchor}: empty positive pool")
    return _draw(cand, n_pos, rng)


def sample_negatives(
    anchor: int, pool: np.ndarray, num_edges: int, n_neg: int, rng: np.random.Generator
) -> np.ndarray:
    """``n_neg`` edges outside the walk pool and different from the anchor."""
    mask = np.ones(num_edges, bool)
    mask[pool] = False
    mask[anchor] = False
    cand = np.flatnonzero(mask)
    if len(cand) == 0:
        raise SkipEdge(f"edge {anchor}: every edge is in its walk pool")
    return _draw(cand, n_neg, rng)


# -- early stopping -------------------------------------------------------------

class EarlyStopping:
    """Tracks the best score; ``update`` returns True once ``patience``
    consecutive epochs failed to beat it."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = -np.inf
        self.best_epoch = 0
        self.stale = 0

    def update(self, epoch: int, score: float) -> bool:
        if score > self.best:
            self.best, self.best_epoch, self.stale = score, epoch, 0
        else:
            self.stale += 1
        return self.stale >= self.patience


# -- training step -----------------------------------------------------------------

@dataclass
class Batch:
    needed: np.ndarray  # walk-graph edge ids to embed
    anchor: np.ndarray  # positions in ``needed``
    pos: np.ndarray  # (B, n_pos) positions in ``needed``
    neg: np.ndarray  # (B, n_neg)


def make_batch(anchors, pools, num_edges, cfg: TrainConfig, rng) -> tuple[Batch | None, int]:
    """Sample positives/negatives; returns (batch or None, number skipped)."""
    kept, pos, neg = [], [], []
    for a in anchors:
        try:
            p = sample_positives(a, pools[a], cfg.n_pos, rng)
            n = sample_negatives(a, pools[a], num_edges, cfg.n_neg, rng)
        except SkipEdge:
            continue
        kept.append(a)
        pos.append(p)
        neg.append(n)
    skipped = len(anchors) - len(kept)
    if not kept:
        return None, skipped
    kept = np.array(kept)
    pos, neg = np.array(pos), np.array(neg)
    needed, inv = np.unique(np.concatenate([kept, pos.ravel(), neg.ravel()]), return_inverse=True)
    B = len(kept)
    return (
        Batch(
            needed,
            inv[:B],
            inv[B : B + pos.size].reshape(pos.shape),
            inv[B + pos.size :].reshape(neg.shape),
        ),
        skipped,
    )


def batch_losses(model: AttrE2vec, graph: AttributedGraph, table, summaries, batch: Batch, lam: float):
    """Forward pass for one batch. ``table`` holds walks for every edge of
    ``graph``; ``summaries`` are their precomputed linear summaries or None."""
    if summaries is not None:
        S = summaries[batch.needed]
    else:
        S = neighborhood_summaries(model.cfg, model.params, graph, table.subset(batch.needed))
    H, _ = encode_batch(graph.edge_features[batch.needed], S, model.params)
    anchor = ad.take(H, batch.anchor)
    l_cos = cosine_structural_loss(anchor, ad.take(H, batch.pos), ad.take(H, batch.neg))
    l_mse = mse_reconstruction_loss(anchor, graph.edge_features[batch.needed[batch.anchor]], model.params)
    return total_loss(l_cos, l_mse, lam), l_cos, l_mse


def validation_auc(model, graph, split: SplitSpec, cfg: TrainConfig) -> float:
    labels = graph.edge_labels
    tr = infer_embeddings(graph, split.train, cfg.walk, model.cfg, model.params)
    va = infer_embeddings(graph, split.val, cfg.walk, model.cfg, model.params)
    if len(np.unique(labels[split.train])) < 2:
        return float("nan")
    return classification_auc(tr.h, labels[split.train], va.h, labels[split.val], cfg.l2_strength)


def training_graph(graph: AttributedGraph, split: SplitSpec, cfg: TrainConfig):
    """(walk graph, anchor ids in it). Inductive training removes val/test edges."""
    if cfg.transductive:
        return graph, np.arange(graph.num_edges)
    held = np.union1d(split.val, split.test)
    keep = np.setdiff1d(np.arange(graph.num_edges), held)
    sub, orig = graph.edge_subgraph(keep)
    return sub, np.searchsorted(orig, split.train)


def train(graph: AttributedGraph, split: SplitSpec, cfg: TrainConfig) -> tuple[AttrE2vec, RunReport]:
    """Train on ``split.train`` and select the epoch with best validation AUC.

    With an empty validation set no selection happens and the final epoch
    is returned. The returned model holds the selected parameters.
    """
    if len(split.train) == 0:
        raise ValidationError("training split is empty")
    if len(split.val) and graph.edge_labels is None:
        raise ValidationError("validation AUC needs edge labels")
    started = time.perf_counter()
    walk_graph, anchors = training_graph(graph, split, cfg)
    model = AttrE2vec(
        ModelConfig(graph.d_edge, graph.d_node, cfg.d, cfg.aggregator), seed=cfg.seed
    )
    opt = AdamW(cfg.lr, cfg.betas, cfg.eps, cfg.weight_decay)
    report = RunReport(config=cfg.to_dict())
    stopper = EarlyStopping(cfg.patience)
    best_state = model.params.state()

    for epoch in range(1, cfg.max_epochs + 1):
        table = walk_table(walk_graph, walk_graph.edges, cfg.walk, tag=epoch)
        pools = [table.pool(i) for i in range(walk_graph.num_edges)]
        summaries = None
        if cfg.aggregator in ("avg", "exp"):
            summaries = neighborhood_summaries(model.cfg, model.params, walk_graph, table)
        rng = np.random.default_rng([cfg.seed, epoch, 1])
        order = rng.permutation(anchors)

        cos_sum = mse_sum = 0.0
        n_seen = skipped = 0
        for lo in range(0, len(order), cfg.batch_size):
            batch, skip = make_batch(order[lo : lo + cfg.batch_size], pools, walk_graph.num_edges, cfg, rng)
            skipped += skip
            if batch is None:
                continue
            try:
                loss, l_cos, l_mse = batch_losses(model, walk_graph, table, summaries, batch, cfg.lam)
                model.params.zero_grad()
                loss.backward()
                opt.step(model.params)
            except NumericFault as exc:
                raise NumericFault(f"epoch {epoch}: {exc}") from exc
            B = len(batch.anchor)
            cos_sum += float(l_cos.value) * B
            mse_sum += float(l_mse.value) * B
            n_seen += B
        if n_seen == 0:
            raise UnusableGraph("every training edge was skipped (no positive or negative pool)")

        l_cos_epoch = cos_sum / n_seen
        l_mse_epoch = mse_sum / n_seen
        val_auc = validation_auc(model, graph, split, cfg) if len(split.val) else float("nan")
        report.epochs.append(
            EpochRecord(epoch, cfg.lam * l_cos_epoch + (1 - cfg.lam) * l_mse_epoch, l_cos_epoch, l_mse_epoch, val_auc, skipped)
        )
        log.info("epoch %d loss %.5f cos %.5f mse %.5f val_auc %.4f", epoch, report.epochs[-1].loss, l_cos_epoch, l_mse_epoch, val_auc)

        if np.isnan(val_auc):
            best_state = model.params.state()
            report.best_epoch = epoch
            continue
        stop = stopper.update(epoch, val_auc)
        if stopper.best_epoch == epoch:
            best_state = model.params.state()
        report.best_epoch = stopper.best_epoch
        report.best_val_auc = stopper.best
        if stop:
            break

    model.params.load_state(best_state)
    report.wall_clock = time.perf_counter() - started
    return model, report
