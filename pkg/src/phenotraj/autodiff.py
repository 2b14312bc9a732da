"""Dense float64 tensors with reverse-mode automatic differentiation.

Define-by-run: every primitive builds the result Tensor, remembers its
parents, and attaches a closure that pushes the upstream gradient into them.
backward() walks the recorded graph once in reverse topological order.
Gradients accumulate into .grad; use zero_grad() between steps.
"""

from __future__ import annotations

from contextlib import contextmanager
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .errors import ConfigError, NumericalError, ShapeError

# Every primitive asserts a finite result; flip off only for profiling.
CHECK_FINITE = True

ArrayLike = Union[float, int, Sequence, np.ndarray, "Tensor"]

_grad_enabled = True


@contextmanager
def no_grad():
    """Disable graph recording inside the block.

    Results of operations computed under no_grad do not require gradients and
    hold no backward closures, so forward-only passes (validation, bulk
    encoding) free their intermediates as soon as references drop.
    """
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(
        self,
        data: ArrayLike,
        requires_grad: bool = False,
        _parents: tuple["Tensor", ...] = (),
    ):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad or (
            _grad_enabled and any(p.requires_grad for p in _parents)
        )
        self._parents = _parents
        self._backward = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other: ArrayLike) -> "Tensor":
        return add(self, other)

    def __sub__(self, other: ArrayLike) -> "Tensor":
        return sub(self, other)

    def __mul__(self, other: ArrayLike) -> "Tensor":
        return mul(self, other)

    def __matmul__(self, other: ArrayLike) -> "Tensor":
        return matmul(self, other)


def as_tensor(x: ArrayLike) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(data: ArrayLike) -> Tensor:
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True)


def zero_grad(tensors: Iterable[Tensor]) -> None:
    for t in tensors:
        t.grad = np.zeros_like(t.data)


def _accumulate(node: Tensor, g: np.ndarray) -> None:
    node.grad = g if node.grad is None else node.grad + g


def _sum_to_shape(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce a broadcast gradient back to the operand's shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(
        i for i, (gs, s) in enumerate(zip(g.shape, shape)) if s == 1 and gs != 1
    )
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _make(
    name: str,
    data: np.ndarray,
    parents: tuple[Tensor, ...],
    backward,
) -> Tensor:
    if CHECK_FINITE and not np.all(np.isfinite(data)):
        raise NumericalError(f"{name}: produced non-finite values")
    out = Tensor(data, _parents=parents)
    if out.requires_grad:
        out._backward = backward
    return out


# ---------------------------------------------------------------------------
# primitives


def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data + b.data
    except ValueError:
        raise ShapeError(f"add: incompatible shapes {a.shape} and {b.shape}")
    out = _make("add", data, (a, b), None)

    def backward():
        g = out.grad
        if a.requires_grad:
            _accumulate(a, _sum_to_shape(g, a.data.shape))
        if b.requires_grad:
            _accumulate(b, _sum_to_shape(g, b.data.shape))

    out._backward = backward if out.requires_grad else None
    return out


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data - b.data
    except ValueError:
        raise ShapeError(f"sub: incompatible shapes {a.shape} and {b.shape}")
    out = _make("sub", data, (a, b), None)

    def backward():
        g = out.grad
        if a.requires_grad:
            _accumulate(a, _sum_to_shape(g, a.data.shape))
        if b.requires_grad:
            _accumulate(b, _sum_to_shape(-g, b.data.shape))

    out._backward = backward if out.requires_grad else None
    return out


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data * b.data
    except ValueError:
        raise ShapeError(f"mul: incompatible shapes {a.shape} and {b.shape}")
    out = _make("mul", data, (a, b), None)

    def backward():
        g = out.grad
        if a.requires_grad:
            _accumulate(a, _sum_to_shape(g * b.data, a.data.shape))
        if b.requires_grad:
            _accumulate(b, _sum_to_shape(g * a.data, b.data.shape))

    out._backward = backward if out.requires_grad else None
    return out


def scale(a: ArrayLike, c: float) -> Tensor:
    a = as_tensor(a)
    c = float(c)
    out = _make("scale", a.data * c, (a,), None)

    def backward():
        if a.requires_grad:
            _accumulate(a, out.grad * c)

    out._backward = backward if out.requires_grad else None
    return out


def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    try:
        data = a.data @ b.data
    except ValueError:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    out = _make("matmul", data, (a, b), None)

    def backward():
        g = out.grad
        if a.requires_grad:
            ga = g @ np.swapaxes(b.data, -1, -2)
            _accumulate(a, _sum_to_shape(ga, a.data.shape))
        if b.requires_grad:
            gb = np.swapaxes(a.data, -1, -2) @ g
            _accumulate(b, _sum_to_shape(gb, b.data.shape))

    out._backward = backward if out.requires_grad else None
    return out


def concat(tensors: Sequence[ArrayLike], axis: int = 0) -> Tensor:
    parts = [as_tensor(t) for t in tensors]
    if not parts:
        raise ShapeError("concat: needs at least one input")
    try:
        data = np.concatenate([p.data for p in parts], axis=axis)
    except ValueError:
        raise ShapeError(
            f"concat: incompatible shapes {[p.shape for p in parts]} on axis {axis}"
        )
    out = _make("concat", data, tuple(parts), None)
    extents = [p.data.shape[axis] for p in parts]

    def backward():
        g = out.grad
        offsets = np.cumsum([0] + extents)
        index: list = [slice(None)] * g.ndim
        for p, start, stop in zip(parts, offsets, offsets[1:]):
            if p.requires_grad:
                index[axis] = slice(start, stop)
                _accumulate(p, g[tuple(index)])

    out._backward = backward if out.requires_grad else None
    return out


def tanh(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    y = np.tanh(a.data)
    out = _make("tanh", y, (a,), None)

    def backward():
        if a.requires_grad:
            _accumulate(a, out.grad * (1.0 - y * y))

    out._backward = backward if out.requires_grad else None
    return out


def sigmoid(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    x = a.data
    y = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                 np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    out = _make("sigmoid", y, (a,), None)

    def backward():
        if a.requires_grad:
            _accumulate(a, out.grad * y * (1.0 - y))

    out._backward = backward if out.requires_grad else None
    return out


def relu(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    y = np.maximum(a.data, 0.0)
    out = _make("relu", y, (a,), None)

    def backward():
        if a.requires_grad:
            _accumulate(a, out.grad * (a.data > 0))

    out._backward = backward if out.requires_grad else None
    return out


def softmax(a: ArrayLike, axis: int = -1, mask: Optional[np.ndarray] = None) -> Tensor:
    """Softmax along one axis, with an optional additive mask applied first.

    Mask entries are 0 for real positions and -inf for padding; padded
    positions get exactly zero probability. A row that is entirely masked
    yields all zeros rather than NaNs.
    """
    a = as_tensor(a)
    z = a.data
    if mask is not None:
        try:
            z = z + mask
        except ValueError:
            raise ShapeError(f"softmax: mask shape {mask.shape} vs input {a.shape}")
    zmax = np.max(z, axis=axis, keepdims=True)
    zmax = np.where(np.isfinite(zmax), zmax, 0.0)
    e = np.exp(z - zmax)
    denom = e.sum(axis=axis, keepdims=True)
    p = e / np.where(denom == 0.0, 1.0, denom)
    out = _make("softmax", p, (a,), None)

    def backward():
        g = out.grad
        if a.requires_grad:
            _accumulate(a, p * (g - np.sum(g * p, axis=axis, keepdims=True)))

    out._backward = backward if out.requires_grad else None
    return out


def layer_norm(a: ArrayLike, gain: Tensor, bias: Tensor, eps: float = 1e-12) -> Tensor:
    """Normalize over the last axis, then apply the learnable affine map."""
    a = as_tensor(a)
    width = a.shape[-1] if a.ndim else 0
    if gain.shape != (width,) or bias.shape != (width,):
        raise ShapeError(
            f"layer_norm: gain/bias shapes {gain.shape}/{bias.shape}"
            f" do not match input {a.shape}"
        )
    mu = a.data.mean(axis=-1, keepdims=True)
    var = a.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (a.data - mu) * inv
    out = _make("layer_norm", xhat * gain.data + bias.data, (a, gain, bias), None)

    def backward():
        g = out.grad
        if gain.requires_grad:
            _accumulate(gain, _sum_to_shape(g * xhat, gain.data.shape))
        if bias.requires_grad:
            _accumulate(bias, _sum_to_shape(g, bias.data.shape))
        if a.requires_grad:
            gh = g * gain.data
            dx = inv * (
                gh
                - gh.mean(axis=-1, keepdims=True)
                - xhat * (gh * xhat).mean(axis=-1, keepdims=True)
            )
            _accumulate(a, dx)

    out._backward = backward if out.requires_grad else None
    return out


def dropout(
    a: ArrayLike, p: float, training: bool, rng: Optional[np.random.Generator] = None
) -> Tensor:
    """Inverted dropout: identity in evaluation mode."""
    if not 0.0 <= p < 1.0:
        raise ConfigError(f"dropout: p must lie in [0, 1), got {p}")
    a = as_tensor(a)
    if not training or p == 0.0:
        return a
    if rng is None:
        raise ConfigError("dropout: training mode requires an explicit rng")
    keep = (rng.random(a.shape) >= p) / (1.0 - p)
    out = _make("dropout", a.data * keep, (a,), None)

    def backward():
        if a.requires_grad:
            _accumulate(a, out.grad * keep)

    out._backward = backward if out.requires_grad else None
    return out


def embedding_lookup(table: Tensor, indices: np.ndarray) -> Tensor:
    indices = np.asarray(indices, dtype=np.int64)
    if table.ndim != 2:
        raise ShapeError(f"embedding_lookup: table must be 2-d, got {table.shape}")
    if indices.size and (indices.min() < 0 or indices.max() >= table.shape[0]):
        raise ShapeError(
            f"embedding_lookup: index out of range for table {table.shape}"
        )
    out = _make("embedding_lookup", table.data[indices], (table,), None)

    def backward():
        if table.requires_grad:
            g = np.zeros_like(table.data)
            np.add.at(g, indices, out.grad)
            _accumulate(table, g)

    out._backward = backward if out.requires_grad else None
    return out


def reduce_sum(
    a: ArrayLike, axis: Optional[int] = None, keepdims: bool = False
) -> Tensor:
    a = as_tensor(a)
    out = _make("reduce_sum", np.sum(a.data, axis=axis, keepdims=keepdims), (a,), None)

    def backward():
        g = out.grad
        if a.requires_grad:
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            _accumulate(a, np.broadcast_to(g, a.data.shape).copy())

    out._backward = backward if out.requires_grad else None
    return out


def reduce_mean(
    a: ArrayLike, axis: Optional[int] = None, keepdims: bool = False
) -> Tensor:
    a = as_tensor(a)
    count = a.size if axis is None else a.shape[axis]
    return scale(reduce_sum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def squared_error(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        diff = a.data - b.data
    except ValueError:
        raise ShapeError(f"squared_error: incompatible shapes {a.shape} and {b.shape}")
    out = _make("squared_error", diff * diff, (a, b), None)

    def backward():
        g = out.grad
        if a.requires_grad:
            _accumulate(a, _sum_to_shape(2.0 * diff * g, a.data.shape))
        if b.requires_grad:
            _accumulate(b, _sum_to_shape(-2.0 * diff * g, b.data.shape))

    out._backward = backward if out.requires_grad else None
    return out


def transpose(a: ArrayLike, axes: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    axes = tuple(axes)
    out = _make("transpose", np.transpose(a.data, axes), (a,), None)
    inverse = tuple(np.argsort(axes))

    def backward():
        if a.requires_grad:
            _accumulate(a, np.transpose(out.grad, inverse))

    out._backward = backward if out.requires_grad else None
    return out


def reshape(a: ArrayLike, shape: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    shape = tuple(shape)
    try:
        data = a.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot view {a.shape} as {shape}")
    out = _make("reshape", data, (a,), None)

    def backward():
        if a.requires_grad:
            _accumulate(a, out.grad.reshape(a.data.shape))

    out._backward = backward if out.requires_grad else None
    return out


# ---------------------------------------------------------------------------
# backward pass


def _topo_order(loss: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))
    return order


def backward(loss: Tensor) -> None:
    """Populate .grad for every tensor reachable from the scalar loss.

    The graph is single-use: after the pass each node's parent links and
    closure are dropped. Closures capture the tensors they belong to, which
    makes every node part of a reference cycle; severing the links here lets
    plain reference counting reclaim the whole graph immediately instead of
    waiting on the cycle collector (which lags badly under the large arrays
    a training step allocates).
    """
    if loss.size != 1:
        raise ShapeError(f"backward: loss must be scalar, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    order = _topo_order(loss)
    _accumulate(loss, np.ones_like(loss.data))
    for node in reversed(order):
        if node._backward is not None:
            node._backward()
    for node in order:
        node._backward = None
        node._parents = ()
