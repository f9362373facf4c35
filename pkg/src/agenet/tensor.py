"""Reverse-mode autodiff over dense float64 arrays.

A Tensor wraps a numpy array plus an optional gradient accumulator. Each
differentiable operation records its parent tensors and a backward closure
on the output; the recorded links form the tape. ``backward`` replays the
tape in reverse topological order, visiting every node exactly once and
accumulating (never overwriting) gradients.
"""

from __future__ import annotations

import contextlib
import threading
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "no_grad",
    "grad_enabled",
    "set_nan_checks",
    "backward",
    "add",
    "mul",
    "scale",
    "relu",
    "sigmoid",
    "concat_channels",
    "concat_cols",
    "concat_vec",
    "mul_channel",
    "reshape",
    "tsum",
]

_grad_enabled = True
_nan_checks = False


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block (forward-only evaluation)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def grad_enabled() -> bool:
    return _grad_enabled


def set_nan_checks(on: bool) -> None:
    """When on, every op output is asserted finite (debug aid)."""
    global _nan_checks
    _nan_checks = bool(on)


class Tensor:
    """Dense float64 array with optional gradient accumulation."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward_fn: Callable[[np.ndarray], None] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        backward(self)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, grad={'yes' if self.grad is not None else 'no'})"

    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __mul__(self, other: "Tensor") -> "Tensor":
        return mul(self, other)


def make_op(out_data: np.ndarray, parents: Sequence[Tensor],
            backward_fn: Callable[[np.ndarray], None]) -> Tensor:
    """Wrap an op result, recording parents and the backward rule on the tape.

    ``backward_fn`` receives the upstream gradient for the output and must
    accumulate into each differentiable parent via ``accumulate_grad``.
    """
    if _nan_checks and not np.all(np.isfinite(out_data)):
        raise FloatingPointError("non-finite values in op output")
    out = Tensor(out_data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward_fn = backward_fn
    return out


def accumulate_grad(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def backward(loss: Tensor) -> None:
    """Reverse traversal from a scalar loss; populates ``grad`` fields.

    Each recorded node is visited exactly once, after all of its consumers,
    so a tensor feeding several ops receives the sum of their contributions.
    """
    if loss.data.size != 1:
        raise ValueError(f"backward requires a scalar loss, got shape {loss.data.shape}")
    # Iterative DFS postorder: parents always precede consumers in `order`.
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
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
            if id(p) not in seen:
                stack.append((p, False))
    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward_fn is not None and node.grad is not None:
            node._backward_fn(node.grad)
            if _nan_checks:
                for p in node._parents:
                    if p.grad is not None and not np.all(np.isfinite(p.grad)):
                        raise FloatingPointError("non-finite gradient")


# ---------------------------------------------------------------------------
# Elementwise / structural primitives
# ---------------------------------------------------------------------------

def add(x: Tensor, y: Tensor) -> Tensor:
    if x.data.shape != y.data.shape:
        raise ValueError(f"add shape mismatch: {x.data.shape} vs {y.data.shape}")
    out_data = x.data + y.data

    def bw(go: np.ndarray) -> None:
        accumulate_grad(x, go)
        accumulate_grad(y, go)

    return make_op(out_data, (x, y), bw)


def mul(x: Tensor, y: Tensor) -> Tensor:
    if x.data.shape != y.data.shape:
        raise ValueError(f"mul shape mismatch: {x.data.shape} vs {y.data.shape}")
    out_data = x.data * y.data

    def bw(go: np.ndarray) -> None:
        accumulate_grad(x, go * y.data)
        accumulate_grad(y, go * x.data)

    return make_op(out_data, (x, y), bw)


def scale(x: Tensor, c: float) -> Tensor:
    """Multiply by a python constant (not a tape node)."""
    c = float(c)
    out_data = x.data * c

    def bw(go: np.ndarray) -> None:
        accumulate_grad(x, go * c)

    return make_op(out_data, (x,), bw)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0.0
    out_data = np.where(mask, x.data, 0.0)

    def bw(go: np.ndarray) -> None:
        accumulate_grad(x, go * mask)

    return make_op(out_data, (x,), bw)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # Branch form: never exponentiates a large positive argument.
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softplus(z: np.ndarray) -> np.ndarray:
    """log(1 + e^z) without overflow; log-sigmoid is -softplus(-z)."""
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def sigmoid(x: Tensor) -> Tensor:
    s = _sigmoid(x.data)

    def bw(go: np.ndarray) -> None:
        accumulate_grad(x, go * s * (1.0 - s))

    return make_op(s, (x,), bw)


def concat_channels(parts: Iterable[Tensor]) -> Tensor:
    """Concatenate N×C×H×W tensors along the channel axis."""
    parts = list(parts)
    base = parts[0].data.shape
    for p in parts[1:]:
        s = p.data.shape
        if len(s) != 4 or s[0] != base[0] or s[2:] != base[2:]:
            raise ValueError(f"concat_channels requires matching N,H,W: {base} vs {s}")
    out_data = np.concatenate([p.data for p in parts], axis=1)
    splits = np.cumsum([p.data.shape[1] for p in parts])[:-1]

    def bw(go: np.ndarray) -> None:
        for p, g in zip(parts, np.split(go, splits, axis=1)):
            accumulate_grad(p, g)

    return make_op(out_data, tuple(parts), bw)


def mul_channel(x: Tensor, s: Tensor) -> Tensor:
    """Multiply N×C×H×W by per-channel weights N×C (broadcast over H,W)."""
    if x.data.ndim != 4 or s.data.shape != x.data.shape[:2]:
        raise ValueError(f"mul_channel expects NxCxHxW and NxC, got {x.data.shape} and {s.data.shape}")
    out_data = x.data * s.data[:, :, None, None]

    def bw(go: np.ndarray) -> None:
        accumulate_grad(x, go * s.data[:, :, None, None])
        accumulate_grad(s, np.sum(go * x.data, axis=(2, 3)))

    return make_op(out_data, (x, s), bw)


def concat_vec(parts: Iterable[Tensor]) -> Tensor:
    """Concatenate 1-d tensors."""
    parts = list(parts)
    if any(p.data.ndim != 1 for p in parts):
        raise ValueError("concat_vec expects 1-d tensors")
    out_data = np.concatenate([p.data for p in parts])
    splits = np.cumsum([p.data.shape[0] for p in parts])[:-1]

    def bw(go: np.ndarray) -> None:
        for p, g in zip(parts, np.split(go, splits)):
            accumulate_grad(p, g)

    return make_op(out_data, tuple(parts), bw)


def concat_cols(parts: Iterable[Tensor]) -> Tensor:
    """Concatenate N×D feature matrices along the feature axis."""
    parts = list(parts)
    rows = parts[0].data.shape[0]
    for p in parts:
        if p.data.ndim != 2 or p.data.shape[0] != rows:
            raise ValueError(f"concat_cols requires matching batch: {[q.data.shape for q in parts]}")
    out_data = np.concatenate([p.data for p in parts], axis=1)
    splits = np.cumsum([p.data.shape[1] for p in parts])[:-1]

    def bw(go: np.ndarray) -> None:
        for p, g in zip(parts, np.split(go, splits, axis=1)):
            accumulate_grad(p, g)

    return make_op(out_data, tuple(parts), bw)


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    out_data = x.data.reshape(shape)

    def bw(go: np.ndarray) -> None:
        accumulate_grad(x, go.reshape(x.data.shape))

    return make_op(out_data, (x,), bw)


def tsum(x: Tensor) -> Tensor:
    out_data = np.asarray(np.sum(x.data))

    def bw(go: np.ndarray) -> None:
        accumulate_grad(x, np.full_like(x.data, float(go)))

    return make_op(out_data, (x,), bw)
