"""Dense float64 tensors with tape-based reverse-mode differentiation.

Operations executed while a :class:`Tape` is active are recorded in execution
order; :func:`backward` replays them in reverse.  Outside a tape every op is a
plain numpy computation and nothing is recorded, which is what inference uses.
"""
from __future__ import annotations

import threading
from typing import Callable, Iterable, Sequence

import numpy as np

DTYPE = np.float64

_local = threading.local()


class ShapeError(ValueError):
    pass


def _active_tape() -> "Tape | None":
    stack = getattr(_local, "stack", None)
    return stack[-1] if stack else None


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "__weakref__")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=DTYPE)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return index(self, key)

    def sum(self, axis=None, keepdims=False):
        return reduce_sum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return reduce_mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    @property
    def T(self):
        return transpose(self)


class Parameter(Tensor):
    """A trainable tensor.  ``grad`` always exists and has the value's shape."""

    __slots__ = ("name", "frozen")

    def __init__(self, data, name: str = "", frozen: bool = False):
        super().__init__(data, requires_grad=True)
        self.name = name
        self.frozen = frozen
        self.grad = np.zeros_like(self.data)

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape})"


class Tape:
    """Records differentiable operations in execution order.

    Use as a context manager; tapes nest and are thread-local, so independent
    threads can each run their own computation.
    """

    def __init__(self):
        self.nodes: list[tuple[Tensor, tuple[Tensor, ...], Callable]] = []

    def __enter__(self) -> "Tape":
        stack = getattr(_local, "stack", None)
        if stack is None:
            stack = _local.stack = []
        stack.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _local.stack.pop()

    def __len__(self) -> int:
        return len(self.nodes)

    def record(self, out: Tensor, parents: tuple[Tensor, ...], backward_fn: Callable) -> None:
        self.nodes.append((out, parents, backward_fn))

    def clear(self) -> None:
        self.nodes.clear()


class no_grad:
    """Suspend recording inside an active tape."""

    def __enter__(self):
        stack = getattr(_local, "stack", None)
        if stack is None:
            stack = _local.stack = []
        self._saved = list(stack)
        stack.clear()

    def __exit__(self, *exc):
        _local.stack[:] = self._saved


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents: Sequence[Tensor], backward_fn: Callable) -> Tensor:
    tape = _active_tape()
    needs = tape is not None and any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=needs)
    if needs:
        tape.record(out, tuple(parents), backward_fn)
    return out


def backward(loss: Tensor, tape: Tape) -> None:
    """Accumulate d(loss)/d(param) into every reachable Parameter's ``grad``."""
    if loss.data.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not np.isfinite(loss.data).all():
        raise FloatingPointError("loss is not finite")
    loss.grad = np.ones_like(loss.data)
    for out, parents, fn in reversed(tape.nodes):
        g = out.grad
        if g is None:
            continue
        grads = fn(g)
        for p, pg in zip(parents, grads):
            if pg is None or not p.requires_grad:
                continue
            if p.grad is None:
                p.grad = np.array(pg, dtype=DTYPE, copy=True)
            else:
                p.grad = p.grad + pg
        if not isinstance(out, Parameter):
            out.grad = None
    if not isinstance(loss, Parameter):
        loss.grad = None


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _check_broadcast(a: Tensor, b: Tensor, op: str) -> tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


# ---------------------------------------------------------------- elementwise


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "add")
    sa, sb = a.shape, b.shape
    return _make(a.data + b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "sub")
    sa, sb = a.shape, b.shape
    return _make(a.data - b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "mul")
    ad, bd = a.data, b.data
    return _make(
        ad * bd,
        (a, b),
        lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)),
    )


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "div")
    ad, bd = a.data, b.data
    out = ad / bd
    return _make(
        out,
        (a, b),
        lambda g: (_unbroadcast(g / bd, ad.shape), _unbroadcast(-g * out / bd, bd.shape)),
    )


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _make(-a.data, (a,), lambda g: (-g,))


def tanh(a) -> Tensor:
    a = as_tensor(a)
    y = np.tanh(a.data)
    return _make(y, (a,), lambda g: (g * (1.0 - y * y),))


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    x = a.data
    # split by sign to avoid overflow in exp
    y = np.empty_like(x)
    pos = x >= 0
    y[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    y[~pos] = ex / (1.0 + ex)
    return _make(y, (a,), lambda g: (g * y * (1.0 - y),))


def relu(a) -> Tensor:
    a = as_tensor(a)
    on = a.data > 0
    return _make(np.where(on, a.data, 0.0), (a,), lambda g: (g * on,))


def exp(a) -> Tensor:
    a = as_tensor(a)
    y = np.exp(a.data)
    return _make(y, (a,), lambda g: (g * y,))


def log(a) -> Tensor:
    a = as_tensor(a)
    x = a.data
    return _make(np.log(x), (a,), lambda g: (g / x,))


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    y = np.sqrt(a.data)
    return _make(y, (a,), lambda g: (g * 0.5 / y,))


def masked_fill(a, mask, value: float) -> Tensor:
    """Replace entries where ``mask`` is true by ``value``; those entries get no gradient."""
    a = as_tensor(a)
    mask = np.asarray(mask, dtype=bool)
    try:
        mask_b = np.broadcast_to(mask, a.shape)
    except ValueError:
        raise ShapeError(f"masked_fill: mask shape {mask.shape} does not fit {a.shape}") from None
    return _make(np.where(mask_b, value, a.data), (a,), lambda g: (np.where(mask_b, 0.0, g),))


# ---------------------------------------------------------------- linear algebra


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim == 1 and b.ndim >= 2:
        return reshape(matmul(reshape(a, (1, a.shape[0])), b), b.shape[:-2] + b.shape[-1:])
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    ad, bd = a.data, b.data

    def fn(g):
        ga = g @ np.swapaxes(bd, -1, -2)
        gb = np.swapaxes(ad, -1, -2) @ g
        return _unbroadcast(ga, ad.shape), _unbroadcast(gb, bd.shape)

    return _make(ad @ bd, (a, b), fn)


def transpose(a, axes: Sequence[int] | None = None) -> Tensor:
    a = as_tensor(a)
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    return _make(np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inv),))


def reshape(a, shape: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    old = a.shape
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot view {old} as {tuple(shape)}") from None
    return _make(out, (a,), lambda g: (g.reshape(old),))


def concat(tensors: Sequence, axis: int = -1) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    if not ts:
        raise ShapeError("concat: nothing to concatenate")
    try:
        out = np.concatenate([t.data for t in ts], axis=axis)
    except ValueError:
        raise ShapeError(
            f"concat: incompatible shapes {[t.shape for t in ts]} on axis {axis}"
        ) from None
    bounds = np.cumsum([t.shape[axis] for t in ts])[:-1]
    return _make(out, ts, lambda g: tuple(np.split(g, bounds, axis=axis)))


def stack(tensors: Sequence, axis: int = 0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    shapes = {t.shape for t in ts}
    if len(shapes) != 1:
        raise ShapeError(f"stack: shapes differ: {sorted(shapes)}")
    out = np.stack([t.data for t in ts], axis=axis)
    n = len(ts)
    return _make(out, ts, lambda g: tuple(np.take(g, i, axis=axis) for i in range(n)))


def index(a, key) -> Tensor:
    """Numpy-style indexing (basic or advanced); repeated indices accumulate."""
    a = as_tensor(a)
    shape = a.shape

    def fn(g):
        full = np.zeros(shape, dtype=DTYPE)
        np.add.at(full, key, g)
        return (full,)

    return _make(a.data[key], (a,), fn)


def gather(table, ids) -> Tensor:
    """Rows of a 2-D ``table`` selected by an integer array of any shape."""
    table = as_tensor(table)
    ids = np.asarray(ids, dtype=np.int64)
    if table.ndim != 2:
        raise ShapeError(f"gather: table must be 2-D, got {table.shape}")
    n = table.shape[0]
    if ids.size and (ids.min() < 0 or ids.max() >= n):
        raise IndexError(f"gather: id out of range for table with {n} rows")
    shape = table.shape

    def fn(g):
        full = np.zeros(shape, dtype=DTYPE)
        np.add.at(full, ids.reshape(-1), g.reshape(-1, shape[1]))
        return (full,)

    return _make(table.data[ids], (table,), fn)


# ---------------------------------------------------------------- reductions


def reduce_sum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    shape = a.shape
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def fn(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape),)

    return _make(out, (a,), fn)


def reduce_mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    n = a.data.size if axis is None else int(np.prod([a.shape[i] for i in np.atleast_1d(axis)]))
    return reduce_sum(a, axis, keepdims) * (1.0 / n)


def _stable_softmax(x: np.ndarray, axis: int) -> np.ndarray:
    mx = x.max(axis=axis, keepdims=True)
    mx = np.where(np.isfinite(mx), mx, 0.0)
    e = np.exp(x - mx)
    s = e.sum(axis=axis, keepdims=True)
    # rows that are entirely -inf come out as zeros
    return e / np.where(s > 0, s, 1.0)


def softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    y = _stable_softmax(a.data, axis)
    return _make(y, (a,), lambda g: (y * (g - (g * y).sum(axis=axis, keepdims=True)),))


def logsumexp(a, axis: int = -1, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    x = a.data
    mx = x.max(axis=axis, keepdims=True)
    out = np.log(np.exp(x - mx).sum(axis=axis, keepdims=True)) + mx
    w = np.exp(x - out)

    def fn(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (g * w,)

    return _make(out if keepdims else np.squeeze(out, axis=axis), (a,), fn)


def log_softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    x = a.data
    mx = x.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(x - mx).sum(axis=axis, keepdims=True)) + mx
    y = x - lse
    p = np.exp(y)
    return _make(y, (a,), lambda g: (g - p * g.sum(axis=axis, keepdims=True),))


def layer_norm(a, gamma, beta, eps: float = 1e-5) -> Tensor:
    """Normalise over the last axis, then scale and shift."""
    a, gamma, beta = as_tensor(a), as_tensor(gamma), as_tensor(beta)
    x = a.data
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    gd = gamma.data
    n = x.shape[-1]

    def fn(g):
        gx_hat = g * gd
        gx = inv / n * (
            n * gx_hat - gx_hat.sum(-1, keepdims=True) - xhat * (gx_hat * xhat).sum(-1, keepdims=True)
        )
        return gx, _unbroadcast(g * xhat, gd.shape), _unbroadcast(g, beta.shape)

    return _make(xhat * gd + beta.data, (a, gamma, beta), fn)


def dropout(a, rate: float, rng: np.random.Generator | None) -> Tensor:
    if rate <= 0.0 or rng is None:
        return as_tensor(a)
    a = as_tensor(a)
    keep = (rng.random(a.shape) >= rate) / (1.0 - rate)
    return _make(a.data * keep, (a,), lambda g: (g * keep,))


def custom(data: np.ndarray, parents: Iterable[Tensor], backward_fn: Callable) -> Tensor:
    """Register an op whose forward was computed elsewhere (e.g. a compiled kernel)."""
    return _make(np.asarray(data, dtype=DTYPE), tuple(parents), backward_fn)
