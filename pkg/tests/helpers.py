"""Shared fixtures-by-function for the test suite."""
import numpy as np

from attre2vec.graph import build_graph
from attre2vec.model import AttrE2vec, ModelConfig, neighborhood_summaries
from attre2vec.trainer import TrainConfig, batch_losses, make_batch
from attre2vec.walks import walk_table


def star(m, d_e=2, d_v=0, seed=0):
    rng = np.random.default_rng(seed)
    edges = [(0, i) for i in range(1, m + 1)]
    nf = rng.normal(size=(m + 1, d_v)) if d_v else None
    return build_graph(edges, nf, rng.normal(size=(m, d_e)), node_count=m + 1)


def complete(n, d_e=2, seed=0):
    rng = np.random.default_rng(seed)
    edges = [(i, j) for i in range(n) for j in range(i + 1, n)]
    return build_graph(edges, None, rng.normal(size=(len(edges), d_e)), node_count=n)


def toy_graph(d_e=3, d_v=2, seed=0, labels=True):
    """6 nodes, 8 edges: a 4-cycle with a chord plus a pendant triangle."""
    rng = np.random.default_rng(seed)
    edges = [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (3, 4), (4, 5), (5, 3)]
    lab = [0, 0, 1, 1, 0, 1, 2, 2] if labels else None
    return build_graph(edges, rng.normal(size=(6, d_v)), rng.normal(size=(8, d_e)), lab)


def random_graph(n, m, d_e=3, d_v=0, seed=0):
    rng = np.random.default_rng(seed)
    pairs = set()
    while len(pairs) < m:
        u, v = rng.integers(n, size=2)
        if u != v:
            pairs.add((min(u, v), max(u, v)))
    pairs = sorted(pairs)
    nf = rng.normal(size=(n, d_v)) if d_v else None
    return build_graph(pairs, nf, rng.normal(size=(m, d_e)), node_count=n)


def rel_err(a, b, floor=1e-8):
    a, b = np.asarray(a, float), np.asarray(b, float)
    denom = max(np.linalg.norm(a), np.linalg.norm(b), floor)
    return np.linalg.norm(a - b) / denom


def numeric_grad(f, x, h=1e-5):
    """Central differences of scalar f() w.r.t. array x (mutated in place)."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        fp = f()
        x[i] = old - h
        fm = f()
        x[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


def end_to_end_check(aggregator, seed, lam=0.5):
    """Worst per-parameter relative error between backprop and central
    differences of the full training loss on one batch of the toy graph."""
    g = toy_graph(seed=seed)
    cfg = TrainConfig(k=2, L=3, d=3, lam=lam, n_pos=2, n_neg=2, aggregator=aggregator, seed=seed)
    model = AttrE2vec(ModelConfig(g.d_edge, g.d_node, cfg.d, aggregator), seed=seed)
    noise = np.random.default_rng(seed + 1000)
    for _, p in model.params.items():  # nonzero biases keep h away from the origin
        p.value = p.value + noise.normal(scale=0.3, size=p.value.shape)
    table = walk_table(g, g.edges, cfg.walk, tag=1)
    pools = [table.pool(i) for i in range(g.num_edges)]
    rng = np.random.default_rng(seed)
    batch, _ = make_batch(np.arange(g.num_edges), pools, g.num_edges, cfg, rng)
    summaries = None
    if aggregator in ("avg", "exp"):
        summaries = neighborhood_summaries(model.cfg, model.params, g, table)

    def loss():
        return float(batch_losses(model, g, table, summaries, batch, lam)[0].value)

    model.params.zero_grad()
    batch_losses(model, g, table, summaries, batch, lam)[0].backward()
    worst = 0.0
    for name, p in model.params.items():
        worst = max(worst, rel_err(p.grad, numeric_grad(loss, p.value), floor=1e-6))
    return worst, len(model.params)
