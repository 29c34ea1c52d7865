"""Dense float64 tensors with tape-based reverse-mode differentiation.

Every op builds a new :class:`Tensor` that remembers its parents and a
closure mapping the output cotangent to one cotangent per parent.  Calling
:func:`grad` walks the tape in reverse topological order.
"""
from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class ShapeError(ValueError):
    """Raised when an op receives operands of incompatible shape."""


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "op", "_parents", "_backward", "__weakref__")

    def __init__(self, data, requires_grad: bool = False, op: str = "leaf",
                 parents: tuple = (), backward: Callable | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.op = op
        self._parents = parents
        self._backward = backward

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(op={self.op!r}, shape={self.shape})"

    def backward(self, seed=None) -> None:
        """Accumulate d(self)/d(leaf) into ``.grad`` of every leaf needing it."""
        leaves = [t for t in _topological(self) if not t._parents and t.requires_grad]
        for leaf, g in zip(leaves, grad(self, leaves, seed)):
            leaf.grad = g if leaf.grad is None else leaf.grad + g

    # operator sugar -------------------------------------------------------
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

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __pow__(self, n: int):
        return power(self, n)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def sum(self, axis=None, keepdims=False):
        return reduce_sum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return reduce_mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, op: str, parents: tuple, backward: Callable) -> Tensor:
    if not np.all(np.isfinite(data)):
        raise FloatingPointError(f"{op}: produced non-finite values")
    needs = any(p.requires_grad for p in parents)
    return Tensor(data, requires_grad=needs, op=op,
                  parents=parents if needs else (), backward=backward if needs else None)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _check_broadcast(op: str, a: Tensor, b: Tensor) -> tuple:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: cannot combine shapes {a.shape} and {b.shape}") from None


def _topological(root: Tensor) -> list[Tensor]:
    order, seen = [], set()
    stack = [(root, False)]
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
    return order


def grad(output: Tensor, wrt: Sequence[Tensor], seed=None) -> list[np.ndarray]:
    """Vector-Jacobian product of ``output`` against each tensor in ``wrt``.

    ``seed`` defaults to ones shaped like the output.  Tensors in ``wrt``
    that the output does not depend on get a zero gradient.
    """
    seed = np.ones_like(output.data) if seed is None else np.asarray(seed, dtype=np.float64)
    if seed.shape != output.shape:
        raise ShapeError(f"backward seed shape {seed.shape} != output shape {output.shape}")
    cot = {id(output): seed}
    for node in reversed(_topological(output)):
        g = cot.get(id(node))
        if g is None or node._backward is None:
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            cot[key] = pg if key not in cot else cot[key] + pg
    return [cot.get(id(t), np.zeros_like(t.data)) for t in wrt]


# elementwise binary ---------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("add", a, b)
    return _make(a.data + b.data, "add", (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("sub", a, b)
    return _make(a.data - b.data, "sub", (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("mul", a, b)
    return _make(a.data * b.data, "mul", (a, b),
                 lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("div", a, b)
    out = a.data / b.data
    return _make(out, "div", (a, b),
                 lambda g: (_unbroadcast(g / b.data, a.shape),
                            _unbroadcast(-g * out / b.data, b.shape)))


def minimum(a, b) -> Tensor:
    """Elementwise min; ties route the gradient to ``a``."""
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("minimum", a, b)
    pick_a = a.data <= b.data
    return _make(np.where(pick_a, a.data, b.data), "minimum", (a, b),
                 lambda g: (_unbroadcast(np.where(pick_a, g, 0.0), a.shape),
                            _unbroadcast(np.where(pick_a, 0.0, g), b.shape)))


# elementwise unary ----------------------------------------------------------

def _unary(op: str, x, fwd, dfdx) -> Tensor:
    x = as_tensor(x)
    out = fwd(x.data)
    return _make(out, op, (x,), lambda g: (g * dfdx(x.data, out),))


def relu(x) -> Tensor:
    return _unary("relu", x, lambda v: np.maximum(v, 0.0), lambda v, o: (v > 0).astype(np.float64))


def tanh(x) -> Tensor:
    return _unary("tanh", x, np.tanh, lambda v, o: 1.0 - o * o)


def exp(x) -> Tensor:
    return _unary("exp", x, np.exp, lambda v, o: o)


def log(x) -> Tensor:
    x = as_tensor(x)
    if np.any(x.data <= 0):
        raise FloatingPointError(f"log: non-positive argument (min {x.data.min():.6g})")
    return _unary("log", x, np.log, lambda v, o: 1.0 / v)


def abs_(x) -> Tensor:
    return _unary("abs", x, np.abs, lambda v, o: np.sign(v))


def softplus(x) -> Tensor:
    def fwd(v):
        return np.log1p(np.exp(-np.abs(v))) + np.maximum(v, 0.0)

    def dfdx(v, o):
        return 0.5 * (1.0 + np.tanh(0.5 * v))

    return _unary("softplus", x, fwd, dfdx)


def power(x, n: int) -> Tensor:
    if int(n) != n:
        raise ValueError("power: only integer exponents are supported")
    n = int(n)
    return _unary(f"pow{n}", x, lambda v: v ** n, lambda v, o: n * v ** (n - 1))


def clip(x, lo: float, hi: float) -> Tensor:
    """Clamp to [lo, hi]; the gradient is zero strictly outside the interval."""
    return _unary("clip", x, lambda v: np.clip(v, lo, hi),
                  lambda v, o: ((v >= lo) & (v <= hi)).astype(np.float64))


def softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=axis, keepdims=True)
    return _make(s, "softmax", (x,),
                 lambda g: (s * (g - (g * s).sum(axis=axis, keepdims=True)),))


# reductions and structure ---------------------------------------------------

def reduce_sum(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _make(out, "sum", (x,), back)


def reduce_mean(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    n = x.data.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return reduce_sum(x, axis, keepdims) * (1.0 / n)


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot view {x.shape} as {tuple(shape)}") from None
    return _make(out, "reshape", (x,), lambda g: (g.reshape(x.shape),))


def getitem(x, idx) -> Tensor:
    x = as_tensor(x)
    out = x.data[idx]

    def back(g):
        full = np.zeros_like(x.data)
        np.add.at(full, idx, g)
        return (full,)

    return _make(np.array(out), "getitem", (x,), back)


def concat(tensors: Iterable, axis: int = 0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in ts], axis=axis)
    except ValueError as exc:
        raise ShapeError(f"concat: {exc} (shapes {[t.shape for t in ts]})") from None
    cuts = np.cumsum([t.shape[axis] for t in ts])[:-1]
    return _make(out, "concat", tuple(ts), lambda g: tuple(np.split(g, cuts, axis=axis)))


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} are not aligned")
    return _make(a.data @ b.data, "matmul", (a, b),
                 lambda g: (g @ b.data.T, a.data.T @ g))


# layers ---------------------------------------------------------------------

def dense(x, weight, bias) -> Tensor:
    """Affine map ``x @ weight.T + bias`` with weight shaped (out, in)."""
    x, weight, bias = as_tensor(x), as_tensor(weight), as_tensor(bias)
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise ShapeError(f"dense: input {x.shape} incompatible with weight {weight.shape}")
    if bias.shape != (weight.shape[0],):
        raise ShapeError(f"dense: bias {bias.shape} does not match weight {weight.shape}")
    out = x.data @ weight.data.T + bias.data
    return _make(out, "dense", (x, weight, bias),
                 lambda g: (g @ weight.data, g.T @ x.data, g.sum(axis=0)))


def conv1d(x, kernel, bias, pad: int = 0) -> Tensor:
    """Cross-correlation over the last (time) axis.

    x: (batch, c_in, length); kernel: (c_out, c_in, k); bias: (c_out,).
    ``pad`` zeros are added on both ends of the time axis.
    """
    x, kernel, bias = as_tensor(x), as_tensor(kernel), as_tensor(bias)
    if x.ndim != 3 or kernel.ndim != 3 or x.shape[1] != kernel.shape[1]:
        raise ShapeError(f"conv1d: input {x.shape} incompatible with kernel {kernel.shape}")
    if bias.shape != (kernel.shape[0],):
        raise ShapeError(f"conv1d: bias {bias.shape} does not match kernel {kernel.shape}")
    k = kernel.shape[2]
    length = x.shape[2] + 2 * pad
    if length < k:
        raise ShapeError(f"conv1d: padded length {length} shorter than kernel width {k}")
    xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad))) if pad else x.data
    win = sliding_window_view(xp, k, axis=2)  # (B, Cin, Lout, k)
    out = np.einsum("bclk,ock->bol", win, kernel.data) + bias.data[None, :, None]
    n_out = out.shape[2]

    def back(g):
        gk = np.einsum("bol,bclk->ock", g, win)
        gwin = np.einsum("bol,ock->bclk", g, kernel.data)
        gxp = np.zeros_like(xp)
        for j in range(k):
            gxp[:, :, j:j + n_out] += gwin[..., j]
        gx = gxp[:, :, pad:pad + x.shape[2]] if pad else gxp
        return gx, gk, g.sum(axis=(0, 2))

    return _make(out, "conv1d", (x, kernel, bias), back)
