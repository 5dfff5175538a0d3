"""Reverse-mode differentiation over numpy arrays.

Only the primitives the AttrE2vec network needs are provided. Each op
builds a :class:`Tensor` that remembers its parents and a closure mapping
the output gradient to parent gradients; :meth:`Tensor.backward` walks the
graph in reverse topological order.

Every op result is checked for NaN/Inf and raises :class:`NumericFault`
naming the op, so a fault is reported where it first appears.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import NumericFault

ArrayLike = "Tensor | np.ndarray | float"


class Tensor:
    __slots__ = ("value", "grad", "requires_grad", "name", "_parents", "_backward")

    # numpy ufuncs on a Tensor would silently build object arrays; refuse them.
    __array_ufunc__ = None

    def __init__(self, value, requires_grad: bool = False, name: str | None = None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], Sequence[np.ndarray | None]] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})"

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self, grad: np.ndarray | None = None) -> None:
        """Accumulate d(self)/d(leaf) into ``.grad`` of every leaf that requires it."""
        if grad is None:
            if self.value.size != 1:
                raise ValueError("backward() without a seed gradient needs a scalar output")
            grad = np.ones_like(self.value)

        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))

        grads: dict[int, np.ndarray] = {id(self): np.asarray(grad, dtype=np.float64)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g if node.grad is None else node.grad + g
                continue
            for p, pg in zip(node._parents, node._backward(g)):
                if pg is None or not p.requires_grad:
                    continue
                grads[id(p)] = grads[id(p)] + pg if id(p) in grads else pg

    # operator sugar; every one maps onto a named primitive below
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __getitem__(self, idx):
        return take(self, idx)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(value: np.ndarray, parents: Sequence[Tensor], backward, op: str) -> Tensor:
    if not np.all(np.isfinite(value)):
        names = ", ".join(p.name for p in parents if p.name) or "unnamed inputs"
        raise NumericFault(f"non-finite output from {op} ({names})")
    out = Tensor(value)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# -- elementwise -----------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _result(
        a.value + b.value,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
        "add",
    )


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _result(
        a.value - b.value,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
        "sub",
    )


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _result(
        a.value * b.value,
        (a, b),
        lambda g: (_unbroadcast(g * b.value, a.shape), _unbroadcast(g * a.value, b.shape)),
        "mul",
    )


def square_diff(a, b) -> Tensor:
    """Elementwise (a - b)**2."""
    a, b = as_tensor(a), as_tensor(b)
    d = a.value - b.value

    def back(g):
        return _unbroadcast(2 * g * d, a.shape), _unbroadcast(-2 * g * d, b.shape)

    return _result(d * d, (a, b), back, "square_diff")


def relu(x) -> Tensor:
    x = as_tensor(x)
    mask = x.value > 0
    return _result(x.value * mask, (x,), lambda g: (g * mask,), "relu")


def tanh(x) -> Tensor:
    x = as_tensor(x)
    y = np.tanh(x.value)
    return _result(y, (x,), lambda g: (g * (1 - y * y),), "tanh")


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    # split by sign so neither branch overflows
    v = x.value
    e = np.exp(-np.abs(v))
    y = np.where(v >= 0, 1 / (1 + e), e / (1 + e))
    return _result(y, (x,), lambda g: (g * y * (1 - y),), "sigmoid")


# -- linear algebra / structure --------------------------------------------

def affine(x, W, b=None) -> Tensor:
    """x @ W + b over the last axis of x; W has shape (in, out)."""
    x, W = as_tensor(x), as_tensor(W)
    parents = [x, W]
    y = x.value @ W.value
    if b is not None:
        b = as_tensor(b)
        parents.append(b)
        y = y + b.value

    def back(g):
        gx = g @ W.value.T
        gW = x.value.reshape(-1, x.shape[-1]).T @ g.reshape(-1, g.shape[-1])
        out = [gx, gW]
        if b is not None:
            out.append(g.reshape(-1, g.shape[-1]).sum(axis=0))
        return out

    return _result(y, parents, back, "affine")


def softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    z = x.value - x.value.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)

    def back(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return _result(y, (x,), back, "softmax")


def concat(xs: Sequence, axis: int = -1) -> Tensor:
    xs = [as_tensor(x) for x in xs]
    sizes = [x.shape[axis] for x in xs]
    cuts = np.cumsum(sizes)[:-1]

    def back(g):
        return np.split(g, cuts, axis=axis)

    return _result(np.concatenate([x.value for x in xs], axis=axis), xs, back, "concat")


def stack(xs: Sequence, axis: int = 0) -> Tensor:
    xs = [as_tensor(x) for x in xs]

    def back(g):
        return [np.take(g, i, axis=axis) for i in range(len(xs))]

    return _result(np.stack([x.value for x in xs], axis=axis), xs, back, "stack")


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    return _result(x.value.reshape(shape), (x,), lambda g: (g.reshape(x.shape),), "reshape")


def take(x, idx) -> Tensor:
    """Gather ``x[idx]`` (basic or integer-array indexing on the leading axes)."""
    x = as_tensor(x)

    def back(g):
        gx = np.zeros_like(x.value)
        np.add.at(gx, idx, g)
        return (gx,)

    return _result(x.value[idx], (x,), back, "take")


def sum(x, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    x = as_tensor(x)

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _result(x.value.sum(axis=axis, keepdims=keepdims), (x,), back, "sum")


def mean(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    n = x.value.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / n, x.shape).copy(),)

    return _result(x.value.mean(axis=axis, keepdims=keepdims), (x,), back, "mean")


def cosine(a, b, axis: int = -1) -> Tensor:
    """Cosine similarity along ``axis`` with broadcasting over the rest.

    A zero-norm operand raises :class:`NumericFault`.
    """
    a, b = as_tensor(a), as_tensor(b)
    na = np.linalg.norm(a.value, axis=axis, keepdims=True)
    nb = np.linalg.norm(b.value, axis=axis, keepdims=True)
    if np.any(na == 0) or np.any(nb == 0):
        raise NumericFault("cosine similarity of a zero-norm vector is undefined")
    dot = (a.value * b.value).sum(axis=axis, keepdims=True)
    c = dot / (na * nb)

    def back(g):
        g = np.expand_dims(g, axis)
        ga = g * (b.value / (na * nb) - c * a.value / na**2)
        gb = g * (a.value / (na * nb) - c * b.value / nb**2)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _result(np.squeeze(c, axis=axis), (a, b), back, "cosine")


# -- recurrent cell ----------------------------------------------------------

def gru_cell(x, h, params: dict[str, Tensor]) -> Tensor:
    """One gated recurrent step.

    z = σ(x Wz + h Uz + bz), r = σ(x Wr + h Ur + br),
    c = tanh(x Wc + (r ⊙ h) Uc + bc), h' = (1 - z) ⊙ h + z ⊙ c.
    """
    z = sigmoid(affine(x, params["Wz"], params["bz"]) + affine(h, params["Uz"]))
    r = sigmoid(affine(x, params["Wr"], params["br"]) + affine(h, params["Ur"]))
    c = tanh(affine(x, params["Wc"], params["bc"]) + affine(r * h, params["Uc"]))
    return h + z * (c - h)
