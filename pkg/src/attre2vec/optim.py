"""Parameter container, AdamW and the JSON checkpoint format."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .autodiff import Tensor
from .errors import AttrE2vecError, DatasetIOError, ValidationError

CHECKPOINT_VERSION = 1


class ParameterStore:
    """Ordered name -> trainable :class:`Tensor` map."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, value: np.ndarray) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter name {name!r}")
        t = Tensor(np.array(value, dtype=np.float64), requires_grad=True, name=name)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def __len__(self) -> int:
        return len(self._params)

    def items(self):
        return self._params.items()

    def zero_grad(self) -> None:
        for p in self._params.values():
            p.grad = None

    def size(self) -> int:
        return sum(p.value.size for p in self._params.values())

    def state(self) -> dict[str, np.ndarray]:
        return {k: p.value.copy() for k, p in self._params.items()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        missing = set(self._params) - set(state)
        extra = set(state) - set(self._params)
        if missing or extra:
            raise ValidationError(
                f"parameter names differ: missing {sorted(missing)}, unexpected {sorted(extra)}"
            )
        for name, p in self._params.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != p.value.shape:
                raise ValidationError(
                    f"parameter {name!r}: checkpoint shape {value.shape} != model shape {p.value.shape}"
                )
            p.value = value.copy()


class MissingGradient(AttrE2vecError):
    pass


@dataclass
class AdamW:
    """Adam with decoupled weight decay (bias-corrected moments)."""

    lr: float = 1e-3
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 0.01
    step_count: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def step(self, params: ParameterStore, allow_missing: bool = False) -> None:
        for name, p in params.items():
            if p.grad is None and not allow_missing:
                raise MissingGradient(f"parameter {name!r} has no gradient")
        self.step_count += 1
        b1, b2 = self.betas
        t = self.step_count
        for name, p in params.items():
            g = np.zeros_like(p.value) if p.grad is None else p.grad
            if name not in self.m:
                self.m[name] = np.zeros_like(p.value)
                self.v[name] = np.zeros_like(p.value)
            m = self.m[name] = b1 * self.m[name] + (1 - b1) * g
            v = self.v[name] = b2 * self.v[name] + (1 - b2) * g * g
            m_hat = m / (1 - b1**t)
            v_hat = v / (1 - b2**t)
            p.value = p.value * (1 - self.lr * self.weight_decay) - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def adamw_step(params: ParameterStore, state: AdamW) -> None:
    state.step(params)


def save_checkpoint(path, params: ParameterStore, config: dict, extra: dict | None = None) -> None:
    payload = {
        "version": CHECKPOINT_VERSION,
        "config": config,
        "params": {
            name: {"shape": list(p.value.shape), "values": p.value.ravel().tolist()}
            for name, p in params.items()
        },
    }
    if extra:
        payload.update(extra)
    try:
        Path(path).write_text(json.dumps(payload))
    except OSError as exc:
        raise DatasetIOError(f"cannot write checkpoint {path}: {exc}") from exc


def read_checkpoint(path) -> tuple[dict, dict[str, np.ndarray], dict]:
    """Return (config, name -> array, full payload)."""
    try:
        payload = json.loads(Path(path).read_text())
    except OSError as exc:
        raise DatasetIOError(f"cannot read checkpoint {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"checkpoint {path} is not valid JSON: {exc}") from exc
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValidationError(f"checkpoint {path}: unsupported version {payload.get('version')!r}")
    state = {}
    for name, entry in payload["params"].items():
        values = np.asarray(entry["values"], dtype=np.float64)
        shape = tuple(entry["shape"])
        if values.size != int(np.prod(shape)):
            raise ValidationError(f"checkpoint {path}: {name!r} has {values.size} values for shape {shape}")
        state[name] = values.reshape(shape)
    return payload["config"], state, payload
