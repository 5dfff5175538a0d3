"""Downstream evaluation of edge embeddings.

Logistic regression + one-vs-rest macro AUC for classification, k-means++
with Hungarian-matched accuracy for clustering, and CSV export/import of
embeddings for external projection tools.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.special import log_softmax
from scipy.stats import rankdata

from .errors import ConfigError, DatasetIOError, ValidationError


class DegenerateLabels(ValidationError):
    pass


# -- logistic regression ---------------------------------------------------

@dataclass
class LogisticRegression:
    """Multinomial logistic regression; columns follow ``classes``."""

    W: np.ndarray
    b: np.ndarray
    classes: np.ndarray
    l2_strength: float
    loss_history: list[float] = field(default_factory=list)
    converged: bool = False

    def decision_function(self, X) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.W + self.b

    def predict_proba(self, X) -> np.ndarray:
        return np.exp(log_softmax(self.decision_function(X), axis=1))

    def predict(self, X) -> np.ndarray:
        return self.classes[np.argmax(self.decision_function(X), axis=1)]


def lr_objective(W, b, X, Y, l2_strength):
    """Mean cross-entropy + (l2/2)||W||^2 and its gradients; Y is one-hot."""
    logp = log_softmax(X @ W + b, axis=1)
    n = len(X)
    loss = -(Y * logp).sum() / n + 0.5 * l2_strength * (W * W).sum()
    r = (np.exp(logp) - Y) / n
    return loss, X.T @ r + l2_strength * W, r.sum(axis=0)


def logistic_regression_fit(
    X,
    y,
    l2_strength: float = 1.0,
    tol: float = 1e-6,
    max_iter: int = 10_000,
) -> LogisticRegression:
    """Full-batch gradient descent with Armijo backtracking.

    Trial steps use the Barzilai-Borwein length; backtracking makes every
    accepted step decrease the objective. Stops at gradient norm ``tol``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    classes = np.unique(y)
    if len(classes) < 2:
        raise DegenerateLabels(f"need at least 2 classes to fit, got {classes.tolist()}")
    if l2_strength < 0:
        raise ConfigError("l2_strength must be nonnegative", "l2_strength")
    Y = (y[:, None] == classes[None, :]).astype(np.float64)
    W = np.zeros((X.shape[1], len(classes)))
    b = np.zeros(len(classes))

    loss, gW, gb = lr_objective(W, b, X, Y, l2_strength)
    history = [loss]
    step = 1.0
    converged = False
    for _ in range(max_iter):
        gnorm = np.sqrt((gW * gW).sum() + (gb * gb).sum())
        if gnorm <= tol:
            converged = True
            break
        while True:
            W_new, b_new = W - step * gW, b - step * gb
            new_loss, gW_new, gb_new = lr_objective(W_new, b_new, X, Y, l2_strength)
            if new_loss <= loss - 1e-4 * step * gnorm**2:
                break
            step *= 0.5
            if step < 1e-20:
                break
        if new_loss > loss:  # no descent possible at machine precision
            converged = True
            break
        s = np.concatenate([(W_new - W).ravel(), b_new - b])
        g_diff = np.concatenate([(gW_new - gW).ravel(), gb_new - gb])
        W, b, loss, gW, gb = W_new, b_new, new_loss, gW_new, gb_new
        history.append(loss)
        sy = s @ g_diff
        step = (s @ s) / sy if sy > 0 else step * 2.0
    return LogisticRegression(W, b, classes, l2_strength, history, converged)


# -- AUC ----------------------------------------------------------------------

def binary_auc(scores, positive) -> float:
    """Probability a random positive outscores a random negative (ties count 1/2)."""
    scores = np.asarray(scores, dtype=np.float64)
    positive = np.asarray(positive, dtype=bool)
    n_pos = positive.sum()
    n_neg = len(positive) - n_pos
    if n_pos == 0 or n_neg == 0:
        return float("nan")
    ranks = rankdata(scores)
    return float((ranks[positive].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def auc_score(scores, labels, classes=None) -> float:
    """One-vs-rest AUC averaged over the classes present in ``labels``.

    ``scores`` is ``(n, C)`` with column j scoring ``classes[j]`` (default
    ``0..C-1``); a 1-D array is a binary score for class 1. Columns whose
    class is absent from ``labels`` (or is the only class present) are
    left out of the average; NaN if nothing remains.
    """
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim == 1:
        return binary_auc(scores, labels == 1)
    if classes is None:
        classes = np.arange(scores.shape[1])
    if len(scores) != len(labels):
        raise ValidationError(f"{len(scores)} score rows for {len(labels)} labels")
    per_class = [
        binary_auc(scores[:, j], labels == c)
        for j, c in enumerate(classes)
        if np.any(labels == c)
    ]
    per_class = [a for a in per_class if not np.isnan(a)]
    return float(np.mean(per_class)) if per_class else float("nan")


def classification_auc(train_X, train_y, test_X, test_y, l2_strength: float = 1.0) -> float:
    clf = logistic_regression_fit(train_X, train_y, l2_strength)
    return auc_score(clf.predict_proba(test_X), test_y, clf.classes)


# -- clustering ---------------------------------------------------------------

@dataclass
class KMeansResult:
    assignments: np.ndarray
    centers: np.ndarray
    inertia_history: list[float]

    @property
    def inertia(self) -> float:
        return self.inertia_history[-1]


def _sq_dists(X, C):
    return np.maximum(((X[:, None, :] - C[None, :, :]) ** 2).sum(-1), 0.0)


def kmeans_pp(points, K: int, seed: int = 0, max_iter: int = 300) -> KMeansResult:
    """k-means++ (D^2) seeding followed by Lloyd iterations until assignments settle."""
    X = np.asarray(points, dtype=np.float64)
    n = len(X)
    if K < 1 or n < K:
        raise ConfigError(f"k-means needs 1 <= K <= n, got K={K}, n={n}", "K")
    rng = np.random.default_rng(seed)
    centers = [X[rng.integers(n)]]
    d2 = _sq_dists(X, np.array(centers))[:, 0]
    for _ in range(1, K):
        total = d2.sum()
        i = rng.choice(n, p=d2 / total) if total > 0 else rng.integers(n)
        centers.append(X[i])
        d2 = np.minimum(d2, _sq_dists(X, X[i : i + 1])[:, 0])
    C = np.array(centers)

    dist = _sq_dists(X, C)
    assign = dist.argmin(1)
    history = [float(dist[np.arange(n), assign].sum())]
    for _ in range(max_iter):
        for j in range(K):
            members = assign == j
            if members.any():
                C[j] = X[members].mean(0)
        dist = _sq_dists(X, C)
        new_assign = dist.argmin(1)
        history.append(float(dist[np.arange(n), new_assign].sum()))
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
    return KMeansResult(assign, C, history)


def clustering_accuracy(assignments, labels) -> float:
    """Best one-to-one cluster-to-class matching, as a fraction of points."""
    a = np.asarray(assignments)
    y = np.asarray(labels)
    if len(a) != len(y):
        raise ValidationError(f"{len(a)} assignments for {len(y)} labels")
    if len(a) == 0:
        return float("nan")
    _, ai = np.unique(a, return_inverse=True)
    _, yi = np.unique(y, return_inverse=True)
    table = np.zeros((ai.max() + 1, yi.max() + 1), np.int64)
    np.add.at(table, (ai, yi), 1)
    rows, cols = linear_sum_assignment(table, maximize=True)
    return float(table[rows, cols].sum() / len(a))


# -- export ---------------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def export_embeddings(path, keys, h, attention, labels=None) -> None:
    """CSV: u, v, h_0..h_{d-1}, att_f, att_u, att_v, label."""
    keys = np.asarray(keys).reshape(-1, 2)
    h = np.asarray(h, dtype=np.float64)
    h = h.reshape(len(keys), h.shape[-1] if h.ndim > 1 else -1)
    attention = np.asarray(attention, dtype=np.float64).reshape(len(keys), 3)
    d = h.shape[1]
    header = ["u", "v"] + [f"h_{i}" for i in range(d)] + ["att_f", "att_u", "att_v", "label"]
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for i in range(len(keys)):
                label = "" if labels is None else str(int(labels[i]))
                w.writerow(
                    [int(keys[i, 0]), int(keys[i, 1])]
                    + [_fmt(x) for x in h[i]]
                    + [_fmt(x) for x in attention[i]]
                    + [label]
                )
    except OSError as exc:
        raise DatasetIOError(f"cannot write embeddings to {path}: {exc}") from exc


@dataclass
class LoadedEmbeddings:
    keys: np.ndarray
    h: np.ndarray
    attention: np.ndarray
    labels: np.ndarray | None


def load_embeddings(path) -> LoadedEmbeddings:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DatasetIOError(f"cannot read embeddings from {path}: {exc}") from exc
    if not rows:
        raise ValidationError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    d = len(header) - 6
    if d < 0 or header[:2] != ["u", "v"] or header[-1] != "label":
        raise ValidationError(f"{path}: unexpected header {header[:3]}...")
    for ln, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise ValidationError(f"{path}:{ln}: expected {len(header)} fields, got {len(r)}")
    keys = np.array([[int(r[0]), int(r[1])] for r in body], np.int64).reshape(-1, 2)
    h = np.array([[float(x) for x in r[2 : 2 + d]] for r in body]).reshape(-1, d)
    att = np.array([[float(x) for x in r[2 + d : 5 + d]] for r in body]).reshape(-1, 3)
    raw = [r[-1] for r in body]
    labels = None if any(x == "" for x in raw) else np.array([int(x) for x in raw], np.int64)
    return LoadedEmbeddings(keys, h, att, labels)
