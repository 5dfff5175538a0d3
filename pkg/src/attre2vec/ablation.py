"""Feature-noise ablation on the barbell benchmark.

For each shuffle probability p and loss mix lambda, generate a barbell
dataset, train transductively on all of its edges for a few epochs, embed
every edge and score a logistic regression on a held-out subset.
"""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field

import numpy as np

from .data import generate_barbell, make_splits
from .errors import ConfigError
from .evaluation import classification_auc
from .trainer import TrainConfig, train

log = logging.getLogger(__name__)

DEFAULT_P_GRID = tuple(round(0.1 * i, 1) for i in range(11))
DEFAULT_LAM_GRID = (0.0, 0.5, 1.0)


@dataclass(frozen=True)
class AblationConfig:
    p_grid: tuple[float, ...] = DEFAULT_P_GRID
    lam_grid: tuple[float, ...] = DEFAULT_LAM_GRID
    repeats: int = 10
    epochs: int = 5
    # 50 edges at batch size 4 give 13 optimizer steps per epoch
    batch_size: int = 4
    aggregator: str = "avg"
    # classifier trained on per_class edges per class, scored on n_test others
    per_class: int = 5
    n_test: int = 35
    seed: int = 0
    generator: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.p_grid:
            raise ConfigError("p grid is empty", "ablation.p")
        if not self.lam_grid:
            raise ConfigError("lambda grid is empty", "ablation.lam")
        if self.repeats < 1:
            raise ConfigError(f"repeats must be >= 1, got {self.repeats}", "ablation.repeats")

    def train_config(self, lam: float, seed: int) -> TrainConfig:
        opts = dict(
            lam=lam,
            max_epochs=self.epochs,
            batch_size=self.batch_size,
            aggregator=self.aggregator,
            transductive=True,
        )
        opts.update(self.train)
        opts.update(lam=lam, seed=seed)
        return TrainConfig.from_dict(opts)


@dataclass
class AblationRow:
    p: float
    lam: float
    aucs: list[float]

    @property
    def mean(self) -> float:
        return float(np.mean(self.aucs))

    @property
    def std(self) -> float:
        return float(np.std(self.aucs))


def run_cell(p: float, lam: float, repeat: int, cfg: AblationConfig) -> float:
    """Test AUC of one (p, lambda) repeat; repeat r uses seed ``cfg.seed + r``."""
    seed = cfg.seed + repeat
    bundle = generate_barbell(**{**cfg.generator, "shuffle_p": p, "seed": seed})
    split = make_splits(bundle, per_class=cfg.per_class, n_val=0, n_test=cfg.n_test, repeats=1, seed=seed)[0]
    tcfg = cfg.train_config(lam, seed)
    model, _ = train(bundle.graph, split, tcfg)
    h = model.embed(bundle.graph, np.arange(bundle.graph.num_edges), tcfg.walk).h
    y = bundle.labels
    return classification_auc(h[split.train], y[split.train], h[split.test], y[split.test], tcfg.l2_strength)


def run_ablation(cfg: AblationConfig) -> list[AblationRow]:
    rows = []
    for lam in cfg.lam_grid:
        for p in cfg.p_grid:
            aucs = [run_cell(p, lam, r, cfg) for r in range(cfg.repeats)]
            row = AblationRow(float(p), float(lam), aucs)
            log.info("p=%.2f lambda=%.2f auc %.4f +- %.4f", p, lam, row.mean, row.std)
            rows.append(row)
    return rows


def ablation_csv(rows: list[AblationRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["p", "lambda", "mean_auc", "std_auc", "repeats"])
    for r in rows:
        w.writerow([repr(r.p), repr(r.lam), repr(r.mean), repr(r.std), len(r.aucs)])
    return buf.getvalue()


def ablation_runs_csv(rows: list[AblationRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["p", "lambda", "repeat", "auc"])
    for r in rows:
        for i, a in enumerate(r.aucs):
            w.writerow([repr(r.p), repr(r.lam), i, repr(a)])
    return buf.getvalue()
