"""Reverse-mode automatic differentiation over numpy arrays.

Minimal tape-based engine: every op builds a node holding its inputs and a
closure that scatters the output gradient back to them.  Arrays are float32
by default; gradient checks build float64 graphs by passing dtype explicitly.
"""

from __future__ import annotations

import numpy as np

DEFAULT_DTYPE = np.float32


class Tensor:
    """A numpy array plus the bookkeeping needed for backprop."""

    __slots__ = ("data", "grad", "requires_grad", "_backward", "_parents")

    def __init__(self, data, requires_grad=False, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        if isinstance(data, (np.ndarray, np.generic)):
            arr = np.asarray(data) if dtype is None else np.asarray(data).astype(dtype, copy=False)
        else:
            # python scalars/lists default to float32
            arr = np.asarray(data, dtype=dtype if dtype is not None else DEFAULT_DTYPE)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(DEFAULT_DTYPE)
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self._backward = None
        self._parents = ()

    # ------------------------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, grad={self.requires_grad})"

    def detach(self):
        return Tensor(self.data, requires_grad=False)

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data)

    # ------------------------------------------------------------------
    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self, grad=None):
        """Run reverse-mode accumulation from this tensor."""
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a gradient requires a scalar output")
            grad = np.ones_like(self.data)
        topo = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self._accumulate(np.asarray(grad, dtype=self.data.dtype))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def zero_grad(self):
        self.grad = None

    # -- operator sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, _wrap(other, self.dtype))

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, _wrap(other, self.dtype))

    __rmul__ = __mul__

    def __sub__(self, other):
        return add(self, mul(_wrap(other, self.dtype), _const(-1.0, self.dtype)))

    def __rsub__(self, other):
        return add(_wrap(other, self.dtype), mul(self, _const(-1.0, self.dtype)))

    def __neg__(self):
        return mul(self, _const(-1.0, self.dtype))

    def __truediv__(self, other):
        other = _wrap(other, self.dtype)
        return mul(self, power(other, -1.0))

    def __rtruediv__(self, other):
        return mul(_wrap(other, self.dtype), power(self, -1.0))

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, p):
        return power(self, p)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def reshape(self, *shape):
        return reshape(self, shape)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)


# ----------------------------------------------------------------------
def _wrap(x, dtype):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype))


def _const(v, dtype):
    return Tensor(np.asarray(v, dtype=dtype))


def _node(data, parents, backward, dtype=None):
    out = Tensor(data, dtype=dtype)
    if any(p.requires_grad or p._parents for p in parents):
        out.requires_grad = any(p.requires_grad for p in parents)
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(g, shape):
    """Sum `g` down to `shape` (reverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# -- elementwise -------------------------------------------------------
def add(a, b):
    data = a.data + b.data

    def backward(g):
        a._accumulate(_unbroadcast(g, a.data.shape))
        b._accumulate(_unbroadcast(g, b.data.shape))

    return _node(data, (a, b), backward)


def mul(a, b):
    data = a.data * b.data

    def backward(g):
        a._accumulate(_unbroadcast(g * b.data, a.data.shape))
        b._accumulate(_unbroadcast(g * a.data, b.data.shape))

    return _node(data, (a, b), backward)


def power(a, p):
    data = a.data ** p

    def backward(g):
        a._accumulate(g * p * a.data ** (p - 1))

    return _node(data, (a,), backward)


def exp(a):
    data = np.exp(a.data)

    def backward(g):
        a._accumulate(g * data)

    return _node(data, (a,), backward)


def log(a):
    data = np.log(a.data)

    def backward(g):
        a._accumulate(g / a.data)

    return _node(data, (a,), backward)


def relu(a):
    data = np.maximum(a.data, 0)

    def backward(g):
        a._accumulate(g * (a.data > 0))

    return _node(data, (a,), backward)


def sigmoid(a):
    data = 1.0 / (1.0 + np.exp(-a.data))

    def backward(g):
        a._accumulate(g * data * (1.0 - data))

    return _node(data, (a,), backward)


def tanh(a):
    data = np.tanh(a.data)

    def backward(g):
        a._accumulate(g * (1.0 - data * data))

    return _node(data, (a,), backward)


def softplus(a):
    # log(1 + exp(x)) in the overflow-safe form
    data = np.logaddexp(0.0, a.data).astype(a.dtype)

    def backward(g):
        a._accumulate(g / (1.0 + np.exp(-a.data)))

    return _node(data, (a,), backward)


def square(a):
    data = a.data * a.data

    def backward(g):
        a._accumulate(g * 2.0 * a.data)

    return _node(data, (a,), backward)


def clamp(a, lo=None, hi=None):
    data = np.clip(a.data, lo, hi)
    inside = np.ones_like(a.data, dtype=bool)
    if lo is not None:
        inside &= a.data >= lo
    if hi is not None:
        inside &= a.data <= hi

    def backward(g):
        a._accumulate(g * inside)

    return _node(data, (a,), backward)


def minimum(a, b):
    take_a = a.data <= b.data
    data = np.where(take_a, a.data, b.data)

    def backward(g):
        a._accumulate(_unbroadcast(g * take_a, a.data.shape))
        b._accumulate(_unbroadcast(g * ~take_a, b.data.shape))

    return _node(data, (a, b), backward)


# -- reductions / shape ------------------------------------------------
def sum_(a, axis=None, keepdims=False):
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is None:
            a._accumulate(np.broadcast_to(g, a.data.shape).copy())
        else:
            if not keepdims:
                g = np.expand_dims(g, axis)
            a._accumulate(np.broadcast_to(g, a.data.shape).copy())

    return _node(data, (a,), backward)


def mean(a, axis=None, keepdims=False):
    n = a.data.size if axis is None else a.data.shape[axis]
    return mul(sum_(a, axis=axis, keepdims=keepdims), _const(1.0 / n, a.dtype))


def reshape(a, shape):
    data = a.data.reshape(shape)

    def backward(g):
        a._accumulate(g.reshape(a.data.shape))

    return _node(data, (a,), backward)


def getitem(a, idx):
    data = a.data[idx]

    def backward(g):
        full = np.zeros_like(a.data)
        np.add.at(full, idx, g)
        a._accumulate(full)

    return _node(data, (a,), backward)


def concat(tensors, axis=0):
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(lo, hi)
            t._accumulate(g[tuple(sl)])

    return _node(data, tuple(tensors), backward)


def matmul(a, b):
    data = a.data @ b.data

    def backward(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        a._accumulate(_unbroadcast(ga, a.data.shape))
        b._accumulate(_unbroadcast(gb, b.data.shape))

    return _node(data, (a, b), backward)


# -- convolution / pooling --------------------------------------------
class ShapeMismatchError(ValueError):
    pass


def conv2d(x, w, b=None, stride=1, padding=0):
    """2-D convolution, NCHW input, FCKK weights, square kernels.

    Output spatial size is floor((H + 2p - K) / stride) + 1 per axis.
    """
    if x.data.ndim != 4 or w.data.ndim != 4:
        raise ShapeMismatchError(
            f"conv2d expects 4-D input and weights, got input {x.data.shape}, weights {w.data.shape}"
        )
    n, c, h, wd = x.data.shape
    f, cw, kh, kw = w.data.shape
    if cw != c:
        raise ShapeMismatchError(
            f"conv2d channel mismatch: input has {c} channels, weights expect {cw} "
            f"(input {x.data.shape}, weights {w.data.shape})"
        )
    if stride not in (1, 2):
        raise ValueError(f"conv2d stride must be 1 or 2, got {stride}")
    if h + 2 * padding < kh or wd + 2 * padding < kw:
        raise ShapeMismatchError(
            f"kernel {kh}x{kw} does not fit input {h}x{wd} with padding {padding}"
        )
    ho = (h + 2 * padding - kh) // stride + 1
    wo = (wd + 2 * padding - kw) // stride + 1

    xp = x.data
    if padding:
        xp = np.pad(xp, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    # [N, C, Ho, Wo, Kh, Kw] view, then columns [N, Ho*Wo, C*Kh*Kw]
    view = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    view = view[:, :, ::stride, ::stride]
    cols = np.ascontiguousarray(view.transpose(0, 2, 3, 1, 4, 5)).reshape(n, ho * wo, c * kh * kw)
    wmat = w.data.reshape(f, c * kh * kw)
    out = cols @ wmat.T  # [N, Ho*Wo, F]
    if b is not None:
        out = out + b.data
    data = out.transpose(0, 2, 1).reshape(n, f, ho, wo)

    def backward(g):
        gmat = g.reshape(n, f, ho * wo).transpose(0, 2, 1)  # [N, Ho*Wo, F]
        gw = np.ascontiguousarray(gmat).reshape(-1, f).T @ cols.reshape(-1, c * kh * kw)
        w._accumulate(gw.reshape(w.data.shape))
        if b is not None:
            b._accumulate(gmat.sum(axis=(0, 1)))
        if not (x.requires_grad or x._parents):
            return   # leaf data input: no need to scatter a gradient back
        gcols = gmat @ wmat  # [N, Ho*Wo, C*Kh*Kw]
        gcols = gcols.reshape(n, ho, wo, c, kh, kw).transpose(0, 3, 1, 2, 4, 5)
        gxp = np.zeros((n, c, h + 2 * padding, wd + 2 * padding), dtype=g.dtype)
        for i in range(kh):
            for j in range(kw):
                gxp[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += gcols[:, :, :, :, i, j]
        if padding:
            gxp = gxp[:, :, padding:-padding, padding:-padding]
        x._accumulate(gxp)

    parents = (x, w) if b is None else (x, w, b)
    return _node(data, parents, backward)


def avg_pool2d(x, factor):
    """Non-overlapping average pooling by an integer factor (NCHW)."""
    n, c, h, w = x.data.shape
    if h % factor or w % factor:
        raise ShapeMismatchError(f"avg_pool2d: {h}x{w} not divisible by {factor}")
    ho, wo = h // factor, w // factor
    data = x.data.reshape(n, c, ho, factor, wo, factor).mean(axis=(3, 5))

    def backward(g):
        gx = np.repeat(np.repeat(g, factor, axis=2), factor, axis=3) / (factor * factor)
        x._accumulate(gx.astype(x.data.dtype))

    return _node(data, (x,), backward)
