"""Parameterized layers on top of the autograd core."""

import numpy as np

from . import autograd as ag
from .autograd import Tensor


def _he_std(fan_in, slope=0.1):
    return np.sqrt(2.0 / ((1.0 + slope * slope) * fan_in))


class Module:
    """Base class: named parameter traversal plus train/eval mode."""

    def __init__(self):
        self.training = True

    def _children(self):
        for name, val in vars(self).items():
            if isinstance(val, Module):
                yield name, val
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        yield f"{name}.{i}", item

    def named_parameters(self, prefix=""):
        for name, val in vars(self).items():
            if isinstance(val, Tensor) and val.requires_grad:
                yield prefix + name, val
        for cname, child in self._children():
            yield from child.named_parameters(prefix + cname + ".")

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def train(self, mode=True):
        self.training = mode
        for _, child in self._children():
            child.train(mode)
        return self

    def eval(self):
        return self.train(False)

    def state_dict(self):
        state = {name: p.data.copy() for name, p in self.named_parameters()}
        for name, buf in self.named_buffers():
            state[name] = buf.copy()
        return state

    def named_buffers(self, prefix=""):
        for name, val in vars(self).items():
            if isinstance(val, np.ndarray):
                yield prefix + name, val
        for cname, child in self._children():
            yield from child.named_buffers(prefix + cname + ".")

    def load_state_dict(self, state):
        params = dict(self.named_parameters())
        buffers = dict(self.named_buffers())
        missing = (set(params) | set(buffers)) - set(state)
        extra = set(state) - (set(params) | set(buffers))
        if missing or extra:
            raise KeyError(f"state mismatch: missing={sorted(missing)} extra={sorted(extra)}")
        for name, arr in state.items():
            target = params.get(name)
            if target is not None:
                if target.data.shape != arr.shape:
                    raise ValueError(f"{name}: shape {arr.shape} != {target.data.shape}")
                target.data = np.asarray(arr, dtype=ag.DTYPE).copy()
            else:
                buffers[name][...] = arr

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


class Conv2d(Module):
    def __init__(self, c_in, c_out, k, stride=1, pad=None, rng=None, slope=0.1):
        super().__init__()
        if pad is None:
            pad = k // 2
        self.stride, self.pad = stride, pad
        std = _he_std(c_in * k * k, slope)
        self.w = Tensor(rng.normal(0.0, std, size=(c_out, c_in, k, k)), requires_grad=True)
        self.b = Tensor(np.zeros((1, c_out, 1, 1)), requires_grad=True)

    def forward(self, x):
        return ag.add(ag.conv2d(x, self.w, self.stride, self.pad), self.b)


class ConvTranspose2d(Module):
    def __init__(self, c_in, c_out, k, stride=2, pad=None, rng=None, slope=0.1):
        super().__init__()
        if pad is None:
            pad = (k - stride) // 2
        self.stride, self.pad = stride, pad
        std = _he_std(c_in * k * k, slope)
        self.w = Tensor(rng.normal(0.0, std, size=(c_in, c_out, k, k)), requires_grad=True)
        self.b = Tensor(np.zeros((1, c_out, 1, 1)), requires_grad=True)

    def forward(self, x):
        return ag.add(ag.conv_transpose2d(x, self.w, self.stride, self.pad), self.b)


class Conv1d(Module):
    def __init__(self, c_in, c_out, k, stride=1, pad=None, rng=None, slope=0.1):
        super().__init__()
        if pad is None:
            pad = k // 2
        self.stride, self.pad = stride, pad
        std = _he_std(c_in * k, slope)
        self.w = Tensor(rng.normal(0.0, std, size=(c_out, c_in, k)), requires_grad=True)
        self.b = Tensor(np.zeros((1, c_out, 1)), requires_grad=True)

    def forward(self, x):
        return ag.add(ag.conv1d(x, self.w, self.stride, self.pad), self.b)


class DepthwiseConv2d(Module):
    def __init__(self, channels, k, stride=1, pad=None, rng=None, slope=0.1):
        super().__init__()
        if pad is None:
            pad = k // 2
        self.stride, self.pad = stride, pad
        std = _he_std(k * k, slope)
        self.w = Tensor(rng.normal(0.0, std, size=(channels, k, k)), requires_grad=True)
        self.b = Tensor(np.zeros((1, channels, 1, 1)), requires_grad=True)

    def forward(self, x):
        return ag.add(ag.depthwise_conv2d(x, self.w, self.stride, self.pad), self.b)


class Linear(Module):
    def __init__(self, d_in, d_out, rng=None, std=None, slope=0.1):
        super().__init__()
        if std is None:
            std = _he_std(d_in, slope)
        self.w = Tensor(rng.normal(0.0, std, size=(d_in, d_out)), requires_grad=True)
        self.b = Tensor(np.zeros((d_out,)), requires_grad=True)

    def forward(self, x):
        return ag.add(ag.matmul(x, self.w), self.b)


class BatchNorm2d(Module):
    """Per-channel batch norm over (B, H, W); running stats for eval mode."""

    def __init__(self, channels, eps=1e-5, momentum=0.1):
        super().__init__()
        self.eps, self.momentum = eps, momentum
        self.gamma = Tensor(np.ones((1, channels, 1, 1)), requires_grad=True)
        self.beta = Tensor(np.zeros((1, channels, 1, 1)), requires_grad=True)
        self.running_mean = np.zeros((1, channels, 1, 1))
        self.running_var = np.ones((1, channels, 1, 1))

    def forward(self, x):
        if self.training:
            mu = ag.mean(x, axis=(0, 2, 3), keepdims=True)
            var = ag.mean(ag.pow_const(ag.sub(x, mu), 2.0), axis=(0, 2, 3), keepdims=True)
            m = self.momentum
            self.running_mean = (1 - m) * self.running_mean + m * mu.data
            self.running_var = (1 - m) * self.running_var + m * var.data
            inv = ag.pow_const(ag.add(var, self.eps), -0.5)
            xn = ag.mul(ag.sub(x, mu), inv)
        else:
            inv = 1.0 / np.sqrt(self.running_var + self.eps)
            xn = ag.mul(ag.sub(x, Tensor(self.running_mean)), Tensor(inv))
        return ag.add(ag.mul(xn, self.gamma), self.beta)


class LSTM(Module):
    """Stacked LSTM; gate order (input, forget, cell, output), forget bias +1."""

    def __init__(self, d_in, hidden, layers, rng=None):
        super().__init__()
        self.hidden, self.layers = hidden, layers
        self.w_ih, self.w_hh, self.bias = [], [], []
        for l in range(layers):
            d = d_in if l == 0 else hidden
            bound = 1.0 / np.sqrt(hidden)
            w_ih = Tensor(rng.uniform(-bound, bound, size=(d, 4 * hidden)), requires_grad=True)
            w_hh = Tensor(rng.uniform(-bound, bound, size=(hidden, 4 * hidden)), requires_grad=True)
            b = np.zeros(4 * hidden)
            b[hidden:2 * hidden] = 1.0
            self.w_ih.append(w_ih)
            self.w_hh.append(w_hh)
            self.bias.append(Tensor(b, requires_grad=True))

    def named_parameters(self, prefix=""):
        for l in range(self.layers):
            yield f"{prefix}w_ih.{l}", self.w_ih[l]
            yield f"{prefix}w_hh.{l}", self.w_hh[l]
            yield f"{prefix}bias.{l}", self.bias[l]

    def init_state(self, batch):
        z = Tensor(np.zeros((batch, self.hidden)))
        return [(z, z) for _ in range(self.layers)]

    def step(self, x, state):
        """One time step: x (B, D) -> (top hidden (B, H), new state)."""
        new_state = []
        inp = x
        h_dim = self.hidden
        for l in range(self.layers):
            h_prev, c_prev = state[l]
            gates = ag.add(ag.add(ag.matmul(inp, self.w_ih[l]),
                                  ag.matmul(h_prev, self.w_hh[l])), self.bias[l])
            i = ag.sigmoid(gates[:, 0:h_dim])
            f = ag.sigmoid(gates[:, h_dim:2 * h_dim])
            g = ag.tanh(gates[:, 2 * h_dim:3 * h_dim])
            o = ag.sigmoid(gates[:, 3 * h_dim:4 * h_dim])
            c = ag.add(ag.mul(f, c_prev), ag.mul(i, g))
            h = ag.mul(o, ag.tanh(c))
            new_state.append((h, c))
            inp = h
        return inp, new_state
