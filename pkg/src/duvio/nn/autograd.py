"""Minimal reverse-mode autodiff over float64 numpy arrays.

A :class:`Tensor` wraps an ndarray and records, for each produced value,
a closure that maps the upstream gradient to parent gradients.  Calling
``backward()`` on a scalar walks the tape in reverse topological order.
Convolutions call into :mod:`duvio.kernels`, so they run on the active
backend (numba or pure numpy); everything else is plain numpy.
"""

import numpy as np

from .. import kernels

DTYPE = np.float64


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_vjp", "_parents")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=DTYPE)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._vjp = None
        self._parents = ()

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self):
        return float(self.data)

    def detach(self):
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self):
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar tensor")
        order = []
        seen = set()
        stack = [(self, False)]
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
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._vjp is None or node.grad is None:
                continue
            for parent, g in zip(node._parents, node._vjp(node.grad)):
                if g is None or not parent.requires_grad:
                    continue
                if parent.grad is None:
                    parent.grad = g.copy() if g.base is not None or g is node.grad else g
                else:
                    parent.grad = parent.grad + g

    # operator sugar ---------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, vjp):
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._vjp = vjp
    return out


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


# elementwise ----------------------------------------------------------
def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _make(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _make(a.data - b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _make(a.data * b.data, (a, b),
                 lambda g: (_unbroadcast(g * b.data, a.shape),
                            _unbroadcast(g * a.data, b.shape)))


def pow_const(a, p):
    a = as_tensor(a)
    return _make(a.data ** p, (a,), lambda g: (g * p * a.data ** (p - 1),))


def reciprocal(a):
    a = as_tensor(a)
    inv = 1.0 / a.data
    return _make(inv, (a,), lambda g: (-g * inv * inv,))


def exp(a):
    a = as_tensor(a)
    y = np.exp(a.data)
    return _make(y, (a,), lambda g: (g * y,))


def log(a):
    a = as_tensor(a)
    return _make(np.log(a.data), (a,), lambda g: (g / a.data,))


def tanh(a):
    a = as_tensor(a)
    y = np.tanh(a.data)
    return _make(y, (a,), lambda g: (g * (1.0 - y * y),))


def sigmoid(a):
    a = as_tensor(a)
    y = 1.0 / (1.0 + np.exp(-np.abs(a.data)))
    y = np.where(a.data >= 0, y, 1.0 - y)
    return _make(y, (a,), lambda g: (g * y * (1.0 - y),))


def softplus(a):
    a = as_tensor(a)
    y = np.maximum(a.data, 0.0) + np.log1p(np.exp(-np.abs(a.data)))

    def vjp(g):
        s = 1.0 / (1.0 + np.exp(-np.abs(a.data)))
        s = np.where(a.data >= 0, s, 1.0 - s)
        return (g * s,)

    return _make(y, (a,), vjp)


def leaky_relu(a, slope=0.1):
    a = as_tensor(a)
    mask = np.where(a.data > 0, 1.0, slope)
    return _make(a.data * mask, (a,), lambda g: (g * mask,))


def absolute(a):
    a = as_tensor(a)
    s = np.sign(a.data)
    return _make(np.abs(a.data), (a,), lambda g: (g * s,))


def softmax(a, axis=-1):
    a = as_tensor(a)
    z = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)

    def vjp(g):
        dot = (g * y).sum(axis=axis, keepdims=True)
        return (y * (g - dot),)

    return _make(y, (a,), vjp)


# reductions & shape ---------------------------------------------------
def sum_(a, axis=None, keepdims=False):
    a = as_tensor(a)
    y = a.data.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape).astype(DTYPE),)
        ax = axis if isinstance(axis, tuple) else (axis,)
        if not keepdims:
            for d in sorted(d % a.ndim for d in ax):
                g = np.expand_dims(g, d)
        return (np.broadcast_to(g, a.shape).astype(DTYPE),)

    return _make(y, (a,), vjp)


def mean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    if axis is None:
        n = a.data.size
    else:
        ax = axis if isinstance(axis, tuple) else (axis,)
        n = int(np.prod([a.shape[d] for d in ax]))
    return mul(sum_(a, axis=axis, keepdims=keepdims), 1.0 / n)


def reshape(a, shape):
    a = as_tensor(a)
    return _make(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def swapaxes(a, ax1, ax2):
    a = as_tensor(a)
    return _make(np.swapaxes(a.data, ax1, ax2), (a,),
                 lambda g: (np.swapaxes(g, ax1, ax2),))


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    y = np.concatenate([t.data for t in tensors], axis=axis)

    def vjp(g):
        return tuple(np.ascontiguousarray(piece)
                     for piece in np.split(g, np.cumsum(sizes)[:-1], axis=axis))

    return _make(y, tensors, vjp)


def getitem(a, idx):
    a = as_tensor(a)
    y = a.data[idx]

    def vjp(g):
        out = np.zeros_like(a.data)
        np.add.at(out, idx, g)
        return (out,)

    return _make(y, (a,), vjp)


def matmul(a, b):
    """Matrix product; supports stacked leading batch dims (no broadcasting)."""
    a, b = as_tensor(a), as_tensor(b)
    y = np.matmul(a.data, b.data)

    def vjp(g):
        bt = np.swapaxes(b.data, -1, -2)
        at = np.swapaxes(a.data, -1, -2)
        ga = np.matmul(g, bt)
        gb = np.matmul(at, g)
        return (_unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape))

    return _make(y, (a, b), vjp)


# convolution ----------------------------------------------------------
def _pair(v):
    return (v, v) if np.isscalar(v) else tuple(v)


def conv2d(x, w, stride=1, pad=0):
    """x (B,C,H,W) cross-correlated with w (O,C,kh,kw)."""
    x, w = as_tensor(x), as_tensor(w)
    stride, pad = _pair(stride), _pair(pad)
    b, c, h, wid = x.shape
    _, _, kh, kw = w.shape
    y = kernels.conv2d_fwd(x.data, w.data, stride, pad)

    def vjp(g):
        g = np.ascontiguousarray(g)
        return (kernels.conv2d_gx(g, w.data, stride, pad, h, wid),
                kernels.conv2d_gw(x.data, g, stride, pad, kh, kw))

    return _make(y, (x, w), vjp)


def conv_transpose2d(x, w, stride=1, pad=0):
    """Transposed conv: x (B,C,H,W), w (C,O,kh,kw); adjoint of conv2d."""
    x, w = as_tensor(x), as_tensor(w)
    stride, pad = _pair(stride), _pair(pad)
    b, c, h, wid = x.shape
    _, o, kh, kw = w.shape
    ho = (h - 1) * stride[0] - 2 * pad[0] + kh
    wo = (wid - 1) * stride[1] - 2 * pad[1] + kw
    y = kernels.conv2d_gx(np.ascontiguousarray(x.data), w.data, stride, pad, ho, wo)

    def vjp(g):
        g = np.ascontiguousarray(g)
        return (kernels.conv2d_fwd(g, w.data, stride, pad),
                kernels.conv2d_gw(g, np.ascontiguousarray(x.data), stride, pad, kh, kw))

    return _make(y, (x, w), vjp)


def conv1d(x, w, stride=1, pad=0):
    """x (B,C,L) cross-correlated with w (O,C,k) via the 2-D kernels."""
    x, w = as_tensor(x), as_tensor(w)
    x4 = reshape(x, (x.shape[0], x.shape[1], 1, x.shape[2]))
    w4 = reshape(w, (w.shape[0], w.shape[1], 1, w.shape[2]))
    y = conv2d(x4, w4, stride=(1, stride), pad=(0, pad))
    return reshape(y, (y.shape[0], y.shape[1], y.shape[3]))


def depthwise_conv2d(x, w, stride=1, pad=0):
    """Per-channel conv: x (B,C,H,W), w (C,kh,kw)."""
    x, w = as_tensor(x), as_tensor(w)
    stride, pad = _pair(stride), _pair(pad)
    b, c, h, wid = x.shape
    _, kh, kw = w.shape
    y = kernels.depthwise2d_fwd(x.data, w.data, stride, pad)

    def vjp(g):
        g = np.ascontiguousarray(g)
        return (kernels.depthwise2d_gx(g, w.data, stride, pad, h, wid),
                kernels.depthwise2d_gw(x.data, g, stride, pad, kh, kw))

    return _make(y, (x, w), vjp)


def avg_pool2d(x, k):
    """Non-overlapping k x k average pooling (H, W divisible by k)."""
    x = as_tensor(x)
    b, c, h, w = x.shape
    if h % k or w % k:
        raise ValueError(f"avg_pool2d: size ({h},{w}) not divisible by {k}")
    y = x.data.reshape(b, c, h // k, k, w // k, k).mean(axis=(3, 5))

    def vjp(g):
        g = g / (k * k)
        return (np.repeat(np.repeat(g, k, axis=2), k, axis=3),)

    return _make(y, (x,), vjp)
