"""Minimal reverse-mode automatic differentiation over dense float64 arrays.

Each op returns a Tensor that remembers its parents and a closure pushing
gradients back to them; ``backward`` replays the recorded graph in reverse
topological order. Everything is eager, 64-bit and deterministic: no hidden
state, no sampling inside ops (noise is always an explicit input).
"""

from __future__ import annotations

import contextlib

import numpy as np


class ShapeError(ValueError):
    """An op received incompatibly shaped inputs; message names the op."""


_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (pure inference)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "op", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, op="leaf", parents=(), backward_fn=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.op = op
        if _GRAD_ENABLED and (requires_grad or any(p.requires_grad for p in parents)):
            self.requires_grad = True
            self._parents = parents
            self._backward = backward_fn
        else:
            self.requires_grad = requires_grad and _GRAD_ENABLED
            self._parents = ()
            self._backward = None

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(op={self.op}, shape={self.data.shape})"

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        other = _as_tensor(other)
        out_data = self.data + other.data

        def bwd(g):
            _accum(self, _unbroadcast(g, self.data.shape))
            _accum(other, _unbroadcast(g, other.data.shape))

        return Tensor(out_data, op="add", parents=(self, other), backward_fn=bwd)

    def __mul__(self, other):
        other = _as_tensor(other)
        out_data = self.data * other.data

        def bwd(g):
            _accum(self, _unbroadcast(g * other.data, self.data.shape))
            _accum(other, _unbroadcast(g * self.data, other.data.shape))

        return Tensor(out_data, op="mul", parents=(self, other), backward_fn=bwd)

    def __neg__(self):
        def bwd(g):
            _accum(self, -g)

        return Tensor(-self.data, op="neg", parents=(self,), backward_fn=bwd)

    def __sub__(self, other):
        other = _as_tensor(other)
        out_data = self.data - other.data

        def bwd(g):
            _accum(self, _unbroadcast(g, self.data.shape))
            _accum(other, _unbroadcast(-g, other.data.shape))

        return Tensor(out_data, op="sub", parents=(self, other), backward_fn=bwd)

    __radd__ = __add__
    __rmul__ = __mul__

    def __matmul__(self, other):
        other = _as_tensor(other)
        a, b = self.data, other.data
        k_b = b.shape[0] if b.ndim == 1 else b.shape[-2]
        if a.shape[-1] != k_b:
            raise ShapeError(f"matmul: {a.shape} @ {b.shape}")
        out_data = a @ b

        def bwd(g):
            if b.ndim == 1:
                _accum(self, np.outer(g, b) if a.ndim == 2 else g * b)
                _accum(other, a.T @ g if a.ndim == 2 else g * a)
            else:
                _accum(self, g @ b.T)
                _accum(other, a.T @ g)

        return Tensor(out_data, op="matmul", parents=(self, other), backward_fn=bwd)

    # -- shape --------------------------------------------------------------

    def reshape(self, *shape):
        src = self.data.shape

        def bwd(g):
            _accum(self, g.reshape(src))

        return Tensor(self.data.reshape(*shape), op="reshape", parents=(self,), backward_fn=bwd)

    def sum(self):
        def bwd(g):
            _accum(self, np.broadcast_to(g, self.data.shape).copy())

        return Tensor(self.data.sum(), op="sum", parents=(self,), backward_fn=bwd)

    def mean(self):
        n = self.data.size

        def bwd(g):
            _accum(self, np.broadcast_to(g / n, self.data.shape).copy())

        return Tensor(self.data.mean(), op="mean", parents=(self,), backward_fn=bwd)


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _accum(t, g):
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64)
    else:
        t.grad += g


def _unbroadcast(grad, shape):
    """Sum grad over axes that numpy broadcasting expanded."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# -- pointwise ops ----------------------------------------------------------


def relu(x):
    mask = x.data > 0

    def bwd(g):
        _accum(x, g * mask)

    return Tensor(x.data * mask, op="relu", parents=(x,), backward_fn=bwd)


def sigmoid(x):
    s = 1.0 / (1.0 + np.exp(-x.data))

    def bwd(g):
        _accum(x, g * s * (1.0 - s))

    return Tensor(s, op="sigmoid", parents=(x,), backward_fn=bwd)


def exp(x):
    e = np.exp(x.data)

    def bwd(g):
        _accum(x, g * e)

    return Tensor(e, op="exp", parents=(x,), backward_fn=bwd)


def log(x):
    def bwd(g):
        _accum(x, g / x.data)

    return Tensor(np.log(x.data), op="log", parents=(x,), backward_fn=bwd)


def maximum(x, floor):
    """Elementwise max with a constant floor; gradient passes where x wins."""
    mask = x.data > floor

    def bwd(g):
        _accum(x, g * mask)

    return Tensor(np.maximum(x.data, floor), op="maximum", parents=(x,), backward_fn=bwd)


def softmax(x):
    """Softmax over the last axis of a 1-D tensor."""
    if x.data.ndim != 1:
        raise ShapeError(f"softmax: expected 1-D input, got {x.data.shape}")
    e = np.exp(x.data - x.data.max())
    s = e / e.sum()

    def bwd(g):
        _accum(x, s * (g - np.dot(g, s)))

    return Tensor(s, op="softmax", parents=(x,), backward_fn=bwd)


def gather(x, idx):
    """Select rows of a 2-D tensor by integer index (with repetition)."""
    if x.data.ndim != 2:
        raise ShapeError(f"gather: expected 2-D input, got {x.data.shape}")
    idx = np.asarray(idx, dtype=np.intp)

    def bwd(g):
        gx = np.zeros_like(x.data)
        np.add.at(gx, idx, g)
        _accum(x, gx)

    return Tensor(x.data[idx], op="gather", parents=(x,), backward_fn=bwd)


# -- convolution ------------------------------------------------------------


def _col_slices(k, stride, out_hw):
    ho, wo = out_hw
    return [
        (slice(i, i + (ho - 1) * stride + 1, stride), slice(j, j + (wo - 1) * stride + 1, stride))
        for i in range(k)
        for j in range(k)
    ]


def conv2d(x, w, b, stride=2, pad=1):
    """2-D convolution, NCHW layout, square kernel; out spatial = ceil(in/stride)."""
    if x.data.ndim != 4:
        raise ShapeError(f"conv2d: expected NCHW input, got {x.data.shape}")
    n, c, h, wd = x.data.shape
    f, cw, k, _ = w.data.shape
    if cw != c:
        raise ShapeError(f"conv2d: input has {c} channels, weight expects {cw}")
    ho = (h + 2 * pad - k) // stride + 1
    wo = (wd + 2 * pad - k) // stride + 1
    xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    slices = _col_slices(k, stride, (ho, wo))
    cols = np.empty((n, c, k * k, ho, wo))
    for m, (si, sj) in enumerate(slices):
        cols[:, :, m] = xp[:, :, si, sj]
    cols2 = cols.reshape(n, c * k * k, ho * wo)
    wm = w.data.reshape(f, c * k * k)
    out = np.matmul(wm, cols2).reshape(n, f, ho, wo) + b.data[None, :, None, None]

    def bwd(g):
        gm = g.reshape(n, f, ho * wo)
        _accum(b, g.sum(axis=(0, 2, 3)))
        gw = np.tensordot(gm, cols2, axes=([0, 2], [0, 2])).reshape(f, c, k, k)
        _accum(w, gw)
        if x.requires_grad:
            gcols = np.matmul(wm.T, gm).reshape(n, c, k * k, ho, wo)
            gxp = np.zeros_like(xp)
            for m, (si, sj) in enumerate(slices):
                gxp[:, :, si, sj] += gcols[:, :, m]
            _accum(x, gxp[:, :, pad : pad + h, pad : pad + wd])

    return Tensor(out, op="conv2d", parents=(x, w, b), backward_fn=bwd)


def conv2d_transpose(x, w, b, stride=2, pad=1):
    """Transposed convolution doubling spatial size (adjoint of conv2d).

    weight layout (in_channels, out_channels, k, k); output spatial is
    exactly stride * input spatial (output_padding of 1 is implied).
    """
    if x.data.ndim != 4:
        raise ShapeError(f"conv2d_transpose: expected NCHW input, got {x.data.shape}")
    n, f, h, wd = x.data.shape
    fw, c, k, _ = w.data.shape
    if fw != f:
        raise ShapeError(f"conv2d_transpose: input has {f} channels, weight expects {fw}")
    ho, wo = stride * h, stride * wd
    hp, wp = ho + 2 * pad, wo + 2 * pad
    slices = _col_slices(k, stride, (h, wd))
    wm = w.data.reshape(f, c * k * k)
    xm = x.data.reshape(n, f, h * wd)
    cols = np.matmul(wm.T, xm).reshape(n, c, k * k, h, wd)
    outp = np.zeros((n, c, hp, wp))
    for m, (si, sj) in enumerate(slices):
        outp[:, :, si, sj] += cols[:, :, m]
    out = outp[:, :, pad : pad + ho, pad : pad + wo] + b.data[None, :, None, None]

    def bwd(g):
        _accum(b, g.sum(axis=(0, 2, 3)))
        gp = np.pad(g, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
        gcols = np.empty((n, c, k * k, h, wd))
        for m, (si, sj) in enumerate(slices):
            gcols[:, :, m] = gp[:, :, si, sj]
        gcols2 = gcols.reshape(n, c * k * k, h * wd)
        gw = np.tensordot(xm, gcols2, axes=([0, 2], [0, 2])).reshape(f, c, k, k)
        _accum(w, gw)
        if x.requires_grad:
            gx = np.matmul(wm, gcols2).reshape(n, f, h, wd)
            _accum(x, gx)

    return Tensor(out, op="conv2d_transpose", parents=(x, w, b), backward_fn=bwd)


# -- backward pass ----------------------------------------------------------


def backward(out, grad=None):
    """Backpropagate from ``out`` through the recorded graph.

    Fills ``.grad`` on every reachable tensor with requires_grad; tensors
    not reached keep grad None (treated as zero by the optimizer).
    """
    if grad is None:
        if out.data.size != 1:
            raise ShapeError("backward: default seed gradient needs a scalar output")
        grad = np.ones_like(out.data)
    order = []
    seen = set()
    stack = [(out, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen and p.requires_grad:
                stack.append((p, False))
    _accum(out, np.asarray(grad, dtype=np.float64))
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
