"""Unsupervised inductive edge embeddings for attributed graphs (AttrE2vec)."""
from .data import DatasetBundle, SplitSpec, generate_barbell, load_dataset, make_splits
from .graph import AttributedGraph, build_graph, incident_edges
from .model import AttrE2vec, ModelConfig, infer_embeddings
from .trainer import TrainConfig, train
from .walks import WalkConfig

__all__ = [
    "AttrE2vec",
    "AttributedGraph",
    "DatasetBundle",
    "ModelConfig",
    "SplitSpec",
    "TrainConfig",
    "WalkConfig",
    "build_graph",
    "generate_barbell",
    "incident_edges",
    "infer_embeddings",
    "load_dataset",
    "make_splits",
    "train",
]
