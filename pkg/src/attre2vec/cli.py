"""Command-line entry point: ``attre2vec train|embed|eval|ablation``.

Runs are driven by a TOML config file. Relative paths inside it are
resolved against the config file's directory. Log verbosity comes from the
``ATTRE2VEC_LOG`` environment variable (e.g. ``INFO``, ``DEBUG``).

Exit codes: 0 success, 1 config or validation error, 2 numeric fault,
3 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import tomli

from .ablation import AblationConfig, ablation_csv, ablation_runs_csv, run_ablation
from .data import DatasetBundle, generate_barbell, load_dataset, make_splits
from .errors import AttrE2vecError, ConfigError, DatasetIOError, NumericFault, ValidationError
from .evaluation import (
    DegenerateLabels,
    classification_auc,
    clustering_accuracy,
    export_embeddings,
    kmeans_pp,
    load_embeddings,
)
from .model import AttrE2vec, ModelConfig
from .optim import read_checkpoint, save_checkpoint
from .trainer import TrainConfig, train

log = logging.getLogger("attre2vec")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3


@dataclass
class RunManifest:
    command: str
    config_path: Path | None
    config: dict
    out_dir: Path
    config_text: str = ""
    train: TrainConfig | None = None
    extra: dict = field(default_factory=dict)


# -- config handling -------------------------------------------------------------

def read_config(path) -> tuple[dict, str]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DatasetIOError(f"cannot read config {path}: {exc}") from exc
    try:
        return tomli.loads(text), text
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _section(cfg: dict, name: str) -> dict:
    sec = cfg.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"[{name}] must be a table", name)
    return sec


def _resolve(base: Path | None, value) -> Path:
    p = Path(value)
    return p if p.is_absolute() or base is None else base / p


def load_bundle(cfg: dict, base: Path | None, seed: int | None = None) -> DatasetBundle:
    """Dataset from ``[dataset]`` files or the ``[generator]`` barbell settings."""
    gen = _section(cfg, "generator")
    ds = _section(cfg, "dataset")
    if gen and ds:
        raise ConfigError("give either [dataset] or [generator], not both", "dataset")
    if gen:
        opts = dict(gen)
        kind = opts.pop("name", "barbell")
        if kind != "barbell":
            raise ConfigError(f"unknown generator {kind!r}", "generator.name")
        if seed is not None:
            opts["seed"] = seed
        try:
            return generate_barbell(**opts)
        except TypeError as exc:
            raise ConfigError(f"generator: {exc}", "generator") from exc
    if "edges" not in ds:
        raise ConfigError("dataset.edges: missing edge list path", "dataset.edges")
    if "edge_features" not in ds:
        raise ConfigError("dataset.edge_features: missing edge feature path", "dataset.edge_features")
    paths = {}
    for key in ("edges", "edge_features", "node_features", "labels"):
        if key in ds:
            p = _resolve(base, ds[key])
            if not p.exists():
                raise DatasetIOError(f"dataset.{key}: no such file {p}")
            paths[key] = p
    return load_dataset(
        paths["edges"],
        paths["edge_features"],
        paths.get("node_features"),
        paths.get("labels"),
        standardize_edges=bool(ds.get("standardize", True)),
    )


def split_options(cfg: dict, seed: int | None) -> dict:
    sec = dict(_section(cfg, "split"))
    opts = {
        "per_class": int(sec.pop("per_class", 20)),
        "n_val": int(sec.pop("n_val", 1000)),
        "n_test": int(sec.pop("n_test", 1000)),
        "repeats": int(sec.pop("repeats", 10)),
        "seed": int(sec.pop("seed", 0) if seed is None else seed),
    }
    repeat = int(sec.pop("repeat", 0))
    if sec:
        raise ConfigError(f"unknown split options: {sorted(sec)}", f"split.{sorted(sec)[0]}")
    if not 0 <= repeat < opts["repeats"]:
        raise ConfigError(f"split.repeat must lie in [0, {opts['repeats']})", "split.repeat")
    opts["repeat"] = repeat
    return opts


def train_config(cfg: dict, seed: int | None) -> TrainConfig:
    raw = dict(_section(cfg, "train"))
    if seed is not None:
        raw["seed"] = seed
    try:
        return TrainConfig.from_dict(raw)
    except ConfigError as exc:
        raise ConfigError(f"train.{exc.field}: {exc}", f"train.{exc.field}") from exc
    except TypeError as exc:
        raise ConfigError(f"train: {exc}", "train") from exc


def _write(path: Path, text: str) -> None:
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise DatasetIOError(f"cannot write {path}: {exc}") from exc


def _out_dir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DatasetIOError(f"cannot create output directory {out}: {exc}") from exc
    return out


def _manifest(args, command: str) -> RunManifest:
    if args.config is None:
        cfg, text, path = {}, "", None
    else:
        path = Path(args.config).resolve()
        cfg, text = read_config(path)
    return RunManifest(command, path, cfg, _out_dir(args.out), text)


def _base(m: RunManifest) -> Path | None:
    return None if m.config_path is None else m.config_path.parent


# -- commands ---------------------------------------------------------------------

def cmd_train(args) -> int:
    m = _manifest(args, "train")
    tcfg = train_config(m.config, args.seed)
    bundle = load_bundle(m.config, _base(m), args.seed)
    sopts = split_options(m.config, args.seed)
    repeat = sopts.pop("repeat")
    split = make_splits(bundle, **sopts)[repeat]
    model, report = train(bundle.graph, split, tcfg)

    ckpt = m.out_dir / "checkpoint.json"
    save_checkpoint(
        ckpt,
        model.params,
        {"model": vars(model.cfg).copy(), "train": tcfg.to_dict()},
        {"split": {"repeat": repeat, **{k: getattr(split, k).tolist() for k in ("train", "val", "test")}}},
    )
    report.checkpoint = str(ckpt)
    _write(m.out_dir / "run_report.csv", report.to_csv())
    _write(m.out_dir / "config.toml", m.config_text)
    print(
        f"best_val_auc={report.best_val_auc:.6f} best_epoch={report.best_epoch} "
        f"epochs={len(report.epochs)} checkpoint={ckpt}"
    )
    return EXIT_OK


def load_model(path) -> tuple[AttrE2vec, TrainConfig, dict]:
    config, state, payload = read_checkpoint(path)
    try:
        mcfg = ModelConfig(**config["model"])
        tcfg = TrainConfig.from_dict(config["train"])
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"checkpoint {path}: malformed config ({exc})") from exc
    model = AttrE2vec(mcfg, seed=tcfg.seed)
    try:
        model.params.load_state(state)
    except (KeyError, ValueError) as exc:
        raise ValidationError(f"checkpoint {path}: {exc}") from exc
    return model, tcfg, payload


def read_edge_list(path, node_ids: list[str]) -> np.ndarray:
    """``src,dst`` rows of external node ids to dense (u, v) pairs."""
    index = {x: i for i, x in enumerate(node_ids)}
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DatasetIOError(f"cannot read edge list {path}: {exc}") from exc
    pairs = []
    for ln, line in enumerate(lines, start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        r = [c.strip() for c in next(csv.reader([line]))]
        if r[:2] == ["src", "dst"]:
            continue
        if len(r) < 2:
            raise ValidationError(f"{path}:{ln}: expected src,dst")
        for x in r[:2]:
            if x not in index:
                raise ValidationError(f"{path}:{ln}: unknown node id {x!r}")
        pairs.append((index[r[0]], index[r[1]]))
    return np.array(pairs, np.int64).reshape(-1, 2)


def cmd_embed(args) -> int:
    m = _manifest(args, "embed")
    model, tcfg, payload = load_model(args.checkpoint)
    bundle = load_bundle(m.config, _base(m), None)
    graph = bundle.graph
    if model.cfg.d_edge != graph.d_edge or model.cfg.d_node != graph.d_node:
        raise ValidationError(
            f"checkpoint expects d_edge={model.cfg.d_edge}, d_node={model.cfg.d_node}; "
            f"dataset has d_edge={graph.d_edge}, d_node={graph.d_node}"
        )
    if args.edges is not None:
        pairs = read_edge_list(args.edges, bundle.node_ids)
        try:
            emb = model.embed(graph, pairs, tcfg.walk)
        except KeyError as exc:
            raise ValidationError(str(exc.args[0])) from exc
        idx = np.array([graph.edge_index(u, v) for u, v in emb.keys], np.int64)
    else:
        if args.split == "all":
            idx = np.arange(graph.num_edges)
        else:
            idx = np.asarray(payload.get("split", {}).get(args.split, []), np.int64)
        emb = model.embed(graph, idx, tcfg.walk)
    out = m.out_dir / "embeddings.csv"
    export_embeddings(out, emb.keys, emb.h, emb.attention, bundle.labels[idx])
    print(f"embedded {len(idx)} edges -> {out}")
    return EXIT_OK


def evaluate_embeddings(h, labels, split_opts: dict, dataset: str = "embeddings") -> list[list]:
    """Metric rows (dataset, split, metric, mean, std): one per repeat, then aggregates."""
    labels = np.asarray(labels, np.int64)
    classes = np.unique(labels)
    split_opts = dict(split_opts)
    split_opts.pop("repeat", None)
    rows = []
    aucs, accs = [], []
    compact = np.searchsorted(classes, labels)
    splits = make_splits(compact, **split_opts)
    for sp in splits:
        try:
            auc = classification_auc(h[sp.train], compact[sp.train], h[sp.test], compact[sp.test])
        except DegenerateLabels:
            auc = float("nan")
        k = min(len(classes), len(h))
        km = kmeans_pp(h, k, seed=split_opts["seed"] + sp.repeat)
        acc = clustering_accuracy(km.assignments, labels)
        aucs.append(auc)
        accs.append(acc)
        rows.append([dataset, sp.repeat, "auc", _num(auc), _num(0.0 * auc)])
        rows.append([dataset, sp.repeat, "clustering_accuracy", _num(acc), _num(0.0)])
    rows.append([dataset, "aggregate", "auc", *_agg(aucs)])
    rows.append([dataset, "aggregate", "clustering_accuracy", *_agg(accs)])
    return rows


def _num(x: float) -> str:
    return "n/a" if np.isnan(x) else repr(float(x))


def _agg(values) -> list[str]:
    v = np.asarray(values, float)
    if np.isnan(v).any():
        return ["n/a", "n/a"]
    return [_num(v.mean()), _num(v.std())]


def cmd_eval(args) -> int:
    m = _manifest(args, "eval")
    emb = load_embeddings(args.embeddings)
    labels = emb.labels
    if args.labels is not None:
        try:
            raw = [ln.strip() for ln in Path(args.labels).read_text(encoding="utf-8").splitlines()]
        except OSError as exc:
            raise DatasetIOError(f"cannot read labels {args.labels}: {exc}") from exc
        raw = [x for x in raw if x and not x.startswith("#")]
        if raw and not raw[0].lstrip("-").isdigit():
            raw = raw[1:]
        labels = np.array([int(x) for x in raw], np.int64)
    if labels is None:
        raise ValidationError("no labels: the embeddings file has no label column and --labels was not given")
    if len(labels) != len(emb.h):
        raise ValidationError(f"{len(labels)} labels for {len(emb.h)} embedding rows")
    if len(labels) == 0:
        raise ValidationError("no embeddings to evaluate")
    sopts = split_options(m.config, args.seed)
    rows = evaluate_embeddings(emb.h, labels, sopts, args.dataset or Path(args.embeddings).stem)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["dataset", "split", "metric", "mean", "std"])
    w.writerows(rows)
    _write(m.out_dir / "metrics.csv", buf.getvalue())
    print(f"auc={rows[-2][3]} clustering_accuracy={rows[-1][3]} -> {m.out_dir / 'metrics.csv'}")
    return EXIT_OK


def ablation_config(cfg: dict, seed: int | None) -> AblationConfig:
    sec = dict(_section(cfg, "ablation"))
    opts = {}
    for key, name in (("p", "p_grid"), ("lam", "lam_grid")):
        if key in sec:
            opts[name] = tuple(float(x) for x in sec.pop(key))
    for key in ("repeats", "epochs", "batch_size", "per_class", "n_test", "seed"):
        if key in sec:
            opts[key] = int(sec.pop(key))
    if "aggregator" in sec:
        opts["aggregator"] = str(sec.pop("aggregator"))
    if sec:
        raise ConfigError(f"unknown ablation options: {sorted(sec)}", f"ablation.{sorted(sec)[0]}")
    if seed is not None:
        opts["seed"] = seed
    gen = dict(_section(cfg, "generator"))
    gen.pop("name", None)
    gen.pop("shuffle_p", None)
    gen.pop("seed", None)
    return AblationConfig(generator=gen, train=dict(_section(cfg, "train")), **opts)


def cmd_ablation(args) -> int:
    m = _manifest(args, "ablation")
    acfg = ablation_config(m.config, args.seed)
    if args.repeats is not None:
        acfg = AblationConfig(**{**vars(acfg), "repeats": args.repeats})
    rows = run_ablation(acfg)
    _write(m.out_dir / "ablation.csv", ablation_csv(rows))
    _write(m.out_dir / "ablation_runs.csv", ablation_runs_csv(rows))
    _write(m.out_dir / "config.toml", m.config_text)
    print(f"{len(rows)} cells x {acfg.repeats} repeats -> {m.out_dir / 'ablation.csv'}")
    return EXIT_OK


# -- entry point ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML run configuration")
    common.add_argument("--out", default=".", help="output directory (created if missing)")
    common.add_argument("--seed", type=int, help="overrides every seed in the config")

    parser = argparse.ArgumentParser(prog="attre2vec", description="Edge embeddings for attributed graphs.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", parents=[common], help="train a model and write a checkpoint")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("embed", parents=[common], help="embed edges with a trained checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--edges", help="src,dst edge list (node ids as in the dataset)")
    p.add_argument("--split", choices=["all", "train", "val", "test"], default="all",
                   help="edges to embed when --edges is not given")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("eval", parents=[common], help="classification AUC and clustering accuracy")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--labels", help="one label per embedding row (overrides the label column)")
    p.add_argument("--dataset", help="name for the dataset column")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablation", parents=[common], help="feature-noise ablation grid on the barbell")
    p.add_argument("--repeats", type=int)
    p.set_defaults(func=cmd_ablation)
    return parser


def _setup_logging() -> None:
    level = os.environ.get("ATTRE2VEC_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NumericFault as exc:
        print(f"error: numeric fault: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DatasetIOError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (AttrE2vecError, ValueError, KeyError) as exc:
        msg = str(exc.args[0] if isinstance(exc, KeyError) and exc.args else exc)
        field_name = getattr(exc, "field", None)
        if field_name and field_name not in msg:
            msg = f"{field_name}: {msg}"
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
