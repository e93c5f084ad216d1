"""Dense tensors over numpy buffers with reverse-mode automatic differentiation.

Every differentiable op builds a node in an implicit computation graph;
``backward`` (or ``GradTape``) replays the graph once in reverse topological
order, accumulating gradients additively where a tensor feeds several
consumers. Storage defaults to float32; gradient-check code may build the
whole graph in float64 by passing float64 inputs.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erf

from .errors import ContractError, NumericsError, ShapeError

_FLOAT_DTYPES = (np.float32, np.float64)


class Tensor:
    __slots__ = ("data", "grad", "_parents", "_backward")

    def __init__(self, data, dtype=None, _parents=(), _backward=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in _FLOAT_DTYPES:
            arr = arr.astype(np.float32)
        self.data = arr
        self.grad = None
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self):
        return float(self.data.reshape(()))

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype})"

    # operator sugar; non-Tensor operands are constants (no gradient)
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(other, mul(self, -1.0))

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise ContractError("tensor/tensor division is not supported")
        return mul(self, 1.0 / float(other))

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)


def as_tensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(x, dtype=dtype)


def _accum(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum ``g`` over the axes numpy broadcast relative to ``shape``."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, s) in enumerate(zip(g.shape, shape)) if s == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data + b.data

    def bwd(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(g, b.data.shape))

    return Tensor(out, _parents=(a, b), _backward=bwd)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data * b.data

    def bwd(g):
        _accum(a, _unbroadcast(g * b.data, a.data.shape))
        _accum(b, _unbroadcast(g * a.data, b.data.shape))

    return Tensor(out, _parents=(a, b), _backward=bwd)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise ShapeError(f"matmul needs >=2-d operands, got {a.data.shape} @ {b.data.shape}")
    if a.data.shape[-1] != b.data.shape[-2]:
        raise ShapeError(f"matmul inner extents differ: {a.data.shape} @ {b.data.shape}")
    out = a.data @ b.data

    def bwd(g):
        _accum(a, _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.data.shape))
        _accum(b, _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.data.shape))

    return Tensor(out, _parents=(a, b), _backward=bwd)


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    out = x.data.reshape(shape)

    def bwd(g):
        _accum(x, g.reshape(x.data.shape))

    return Tensor(out, _parents=(x,), _backward=bwd)


def transpose(x, axes) -> Tensor:
    x = as_tensor(x)
    axes = tuple(axes)
    out = np.transpose(x.data, axes)
    inv = tuple(np.argsort(axes))

    def bwd(g):
        _accum(x, np.transpose(g, inv))

    return Tensor(out, _parents=(x,), _backward=bwd)


def concat(parts, axis=0) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    if not parts:
        raise ContractError("concat needs at least one tensor")
    out = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        for p, piece in zip(parts, np.split(g, splits, axis=axis)):
            _accum(p, piece)

    return Tensor(out, _parents=tuple(parts), _backward=bwd)


def getitem(x, idx) -> Tensor:
    x = as_tensor(x)
    out = x.data[idx]

    def bwd(g):
        gx = np.zeros_like(x.data)
        np.add.at(gx, idx, g)
        _accum(x, gx)

    return Tensor(out, _parents=(x,), _backward=bwd)


def tsum(x, axis=None, keepdims=False) -> Tensor:
    x = as_tensor(x)
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def bwd(g):
        if axis is None:
            _accum(x, np.broadcast_to(g, x.data.shape).copy())
            return
        if not keepdims:
            g = np.expand_dims(g, axis)
        _accum(x, np.broadcast_to(g, x.data.shape).copy())

    return Tensor(out, _parents=(x,), _backward=bwd)


def tmean(x, axis=None, keepdims=False) -> Tensor:
    x = as_tensor(x)
    if axis is None:
        n = x.data.size
    else:
        n = x.data.shape[axis]
    return mul(tsum(x, axis=axis, keepdims=keepdims), 1.0 / n)


def softmax(x, axis=-1) -> Tensor:
    x = as_tensor(x)
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=axis, keepdims=True)

    def bwd(g):
        dot = (g * s).sum(axis=axis, keepdims=True)
        _accum(x, s * (g - dot))

    return Tensor(s, _parents=(x,), _backward=bwd)


def log_softmax(x, axis=-1) -> Tensor:
    x = as_tensor(x)
    z = x.data - x.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=axis, keepdims=True))
    out = z - lse

    def bwd(g):
        _accum(x, g - np.exp(out) * g.sum(axis=axis, keepdims=True))

    return Tensor(out, _parents=(x,), _backward=bwd)


def layer_norm(x, gain, bias, eps=1e-5) -> Tensor:
    """Normalize over the last (embedding) axis, then apply gain and bias."""
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    mu = x.data.mean(axis=-1, keepdims=True)
    xm = x.data - mu
    var = (xm * xm).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xm * inv
    out = gain.data * xhat + bias.data

    def bwd(g):
        lead = tuple(range(g.ndim - 1))
        _accum(gain, _unbroadcast((g * xhat).sum(axis=lead), gain.data.shape))
        _accum(bias, _unbroadcast(g.sum(axis=lead), bias.data.shape))
        dxh = g * gain.data
        dx = inv * (
            dxh
            - dxh.mean(axis=-1, keepdims=True)
            - xhat * (dxh * xhat).mean(axis=-1, keepdims=True)
        )
        _accum(x, dx)

    return Tensor(out, _parents=(x, gain, bias), _backward=bwd)


_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)


def gelu(x) -> Tensor:
    """Exact (erf-based) GELU; smooth, so finite-difference checks are clean."""
    x = as_tensor(x)
    phi = 0.5 * (1.0 + erf(x.data * _INV_SQRT2))
    out = x.data * phi

    def bwd(g):
        pdf = np.exp(-0.5 * x.data * x.data) * _INV_SQRT2PI
        _accum(x, g * (phi + x.data * pdf))

    return Tensor(out.astype(x.data.dtype), _parents=(x,), _backward=bwd)


def tanh(x) -> Tensor:
    x = as_tensor(x)
    t = np.tanh(x.data)

    def bwd(g):
        _accum(x, g * (1.0 - t * t))

    return Tensor(t, _parents=(x,), _backward=bwd)


def assert_finite(x, what="tensor") -> Tensor:
    """Check op: raise if NaN/Inf crept in; otherwise pass through unchanged."""
    x = as_tensor(x)
    if not np.all(np.isfinite(x.data)):
        raise NumericsError(f"non-finite values in {what}")
    return x


class GradTape:
    """Reverse-topological record of every op reaching a scalar loss.

    Each recorded op is visited exactly once on the backward pass; a tape is
    confined to one logical training step (it is not thread-safe).
    """

    def __init__(self, loss: Tensor):
        if loss.data.size != 1:
            raise ContractError(f"loss must be scalar, got shape {loss.data.shape}")
        self.loss = loss
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
        self._order = order  # forward-topological
        self._reachable = seen

    def backward(self, params) -> list[np.ndarray]:
        """Exact gradients of the loss with respect to each param, in order."""
        for node in self._order:
            node.grad = np.zeros_like(node.data)
        self.loss.grad = np.ones_like(self.loss.data)
        for node in reversed(self._order):
            if node._backward is not None:
                node._backward(node.grad)
        out = []
        for p in params:
            if id(p) in self._reachable and p.grad is not None:
                out.append(p.grad)
            else:
                out.append(np.zeros_like(p.data))
        return out


def backward(loss: Tensor, params) -> list[np.ndarray]:
    """Gradients of a scalar loss w.r.t. ``params`` via a fresh GradTape."""
    return GradTape(loss).backward(params)
