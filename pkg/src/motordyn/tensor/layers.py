"""Layer modules with hand-written backward passes.

Every module owns ``params`` and ``grads`` dicts of identically shaped
float64 arrays.  ``backward`` accumulates into ``grads`` (call
``zero_grad`` between steps), so a module reused twice in one graph
receives the sum of both contributions.
"""

import math

import numpy as np

from ..errors import LayerStateError, ShapeError
from . import ops


def uniform_init(rng, shape, fan_in):
    bound = math.sqrt(1.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Module:
    def __init__(self):
        self.params = {}
        self.grads = {}
        self._cache = None

    def add_param(self, name, value):
        value = np.ascontiguousarray(value, dtype=np.float64)
        self.params[name] = value
        self.grads[name] = np.zeros_like(value)

    def zero_grad(self):
        for g in self.grads.values():
            g.fill(0.0)

    def children(self):
        return []

    def named_parameters(self, prefix=""):
        for name, p in self.params.items():
            yield prefix + name, p, self.grads[name]
        for child_name, child in self.children():
            yield from child.named_parameters(f"{prefix}{child_name}.")

    def zero_grad_all(self):
        for _, _, g in self.named_parameters():
            g.fill(0.0)

    def num_parameters(self):
        return sum(p.size for _, p, _ in self.named_parameters())

    def _pop_cache(self):
        if self._cache is None:
            raise LayerStateError(f"{type(self).__name__}.backward called before forward")
        cache, self._cache = self._cache, None
        return cache

    def __call__(self, x):
        return self.forward(x)


class Linear(Module):
    """``y = x @ W.T + b`` over the last axis of ``x``."""

    def __init__(self, in_features, out_features, rng=None):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        self.in_features = in_features
        self.out_features = out_features
        self.add_param("weight", uniform_init(rng, (out_features, in_features), in_features))
        self.add_param("bias", uniform_init(rng, (out_features,), in_features))

    def forward(self, x):
        if x.shape[-1] != self.in_features:
            raise ShapeError(f"Linear expects last dim {self.in_features}, got {x.shape}")
        self._cache = x
        return x @ self.params["weight"].T + self.params["bias"]

    def backward(self, dy):
        x = self._pop_cache()
        x2 = x.reshape(-1, self.in_features)
        dy2 = dy.reshape(-1, self.out_features)
        self.grads["weight"] += dy2.T @ x2
        self.grads["bias"] += dy2.sum(axis=0)
        return dy @ self.params["weight"]


class Conv1d(Module):
    """Stride-1 cross-correlation with zero padding; weight (C_out, C_in, K)."""

    def __init__(self, in_channels, out_channels, kernel_size, padding=0, rng=None):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        self.in_channels, self.out_channels = in_channels, out_channels
        self.kernel_size, self.padding = kernel_size, padding
        fan_in = in_channels * kernel_size
        self.add_param("weight", uniform_init(rng, (out_channels, in_channels, kernel_size), fan_in))
        self.add_param("bias", uniform_init(rng, (out_channels,), fan_in))

    def forward(self, x):
        if x.ndim != 3 or x.shape[1] != self.in_channels:
            raise ShapeError(f"Conv1d expects (B, {self.in_channels}, T), got {x.shape}")
        if self.kernel_size > x.shape[2] + 2 * self.padding:
            raise ShapeError("kernel longer than padded input")
        self._cache = x
        return ops.corr1d(x, self.params["weight"], self.padding) + self.params["bias"][None, :, None]

    def backward(self, dy):
        x = self._pop_cache()
        self.grads["weight"] += ops.corr1d_weight_grad(x, dy, self.kernel_size, self.padding)
        self.grads["bias"] += dy.sum(axis=(0, 2))
        return ops.corr1d_adjoint(dy, self.params["weight"], self.padding)


class ConvTranspose1d(Module):
    """Adjoint of :class:`Conv1d` plus bias; weight (C_in, C_out, K).

    Output length is ``T + K - 1 - 2 * padding``.
    """

    def __init__(self, in_channels, out_channels, kernel_size, padding=0, rng=None):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        self.in_channels, self.out_channels = in_channels, out_channels
        self.kernel_size, self.padding = kernel_size, padding
        fan_in = in_channels * kernel_size
        self.add_param("weight", uniform_init(rng, (in_channels, out_channels, kernel_size), fan_in))
        self.add_param("bias", uniform_init(rng, (out_channels,), fan_in))

    def forward(self, x):
        if x.ndim != 3 or x.shape[1] != self.in_channels:
            raise ShapeError(f"ConvTranspose1d expects (B, {self.in_channels}, T), got {x.shape}")
        if x.shape[2] + self.kernel_size - 1 - 2 * self.padding < 1:
            raise ShapeError("transposed convolution output would be empty")
        self._cache = x
        return ops.corr1d_adjoint(x, self.params["weight"], self.padding) + self.params["bias"][None, :, None]

    def backward(self, dy):
        x = self._pop_cache()
        self.grads["weight"] += ops.corr1d_weight_grad(dy, x, self.kernel_size, self.padding)
        self.grads["bias"] += dy.sum(axis=(0, 2))
        return ops.corr1d(dy, self.params["weight"], self.padding)


class ReLU(Module):
    def forward(self, x):
        mask = x > 0
        self._cache = mask
        return np.where(mask, x, 0.0)

    def backward(self, dy):
        # subgradient at exactly 0 is 0
        return np.where(self._pop_cache(), dy, 0.0)


class Tanh(Module):
    def forward(self, x):
        y = np.tanh(x)
        self._cache = y
        return y

    def backward(self, dy):
        y = self._pop_cache()
        return dy * (1.0 - y * y)


def Activation(kind):
    kinds = {"relu": ReLU, "tanh": Tanh}
    if kind not in kinds:
        raise ValueError(f"unknown activation {kind!r}")
    return kinds[kind]()


class Flatten(Module):
    """(B, ...) -> (B, prod(...))."""

    def forward(self, x):
        self._cache = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dy):
        return dy.reshape(self._pop_cache())


class Reshape(Module):
    def __init__(self, shape):
        super().__init__()
        self.shape = tuple(shape)

    def forward(self, x):
        self._cache = x.shape
        return x.reshape((x.shape[0],) + self.shape)

    def backward(self, dy):
        return dy.reshape(self._pop_cache())


class SwapTimeChannels(Module):
    """(B, C, T) <-> (B, T, C)."""

    def forward(self, x):
        self._cache = True
        return np.ascontiguousarray(x.transpose(0, 2, 1))

    def backward(self, dy):
        self._pop_cache()
        return np.ascontiguousarray(dy.transpose(0, 2, 1))


class Sequential(Module):
    def __init__(self, layers):
        super().__init__()
        self.layers = list(layers)

    def children(self):
        return [(name, layer) for name, layer in self.layers]

    def forward(self, x):
        for _, layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, dy):
        for _, layer in reversed(self.layers):
            dy = layer.backward(dy)
        return dy
