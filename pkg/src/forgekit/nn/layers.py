"""Network layers with explicit forward/backward passes.

Every layer caches what its backward pass needs during forward; backward
consumes the cache and accumulates parameter gradients into ``param.grad``.
The stack is strictly feed-forward (no graph autodiff), which keeps the
arithmetic deterministic and easy to verify against finite differences.
"""
from __future__ import annotations

import numpy as np

from ..errors import ConfigError, UsageError
from .tensor import Tensor, as_tensor


def kaiming_uniform(rng: np.random.Generator, shape, fan_in: int, dtype) -> np.ndarray:
    """Kaiming-uniform init with fan-in scaling (gain for ReLU)."""
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Layer:
    """Base layer: forward pushes a cache entry, backward pops it (LIFO).

    The stack lets a trainer interleave several forward passes before
    backpropagating them in reverse order; inference passes set
    ``cache=False`` and leave no entry behind.
    """

    def __init__(self):
        self._cache_stack: list = []

    def parameters(self) -> list[Tensor]:
        return []

    def forward(self, x: Tensor, cache: bool = True) -> Tensor:
        raise NotImplementedError

    def backward(self, grad_out: Tensor) -> Tensor:
        raise NotImplementedError

    def _push_cache(self, entry, enabled: bool) -> None:
        if enabled:
            self._cache_stack.append(entry)

    def _take_cache(self):
        if not self._cache_stack:
            raise UsageError(f"{type(self).__name__}.backward called without a cached forward")
        return self._cache_stack.pop()


class Conv2D(Layer):
    """2D cross-correlation over NCHW input, implemented via im2col."""

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int,
                 stride: int = 1, padding: int = 0, *,
                 rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        if stride < 1:
            raise ConfigError("stride must be >= 1")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.stride = stride
        self.padding = padding
        fan_in = in_channels * kernel_size * kernel_size
        self.weights = Tensor(kaiming_uniform(
            rng, (out_channels, in_channels, kernel_size, kernel_size), fan_in, dtype))
        self.bias = Tensor(np.zeros(out_channels, dtype=dtype))

    def parameters(self) -> list[Tensor]:
        return [self.weights, self.bias]

    def _check_input(self, x: np.ndarray) -> None:
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise ConfigError(
                f"Conv2D expects (N,{self.in_channels},H,W), got {x.shape}")
        k, p = self.kernel_size, self.padding
        if x.shape[2] + 2 * p < k or x.shape[3] + 2 * p < k:
            raise ConfigError(f"kernel {k} larger than padded input {x.shape}")

    def forward(self, x: Tensor, cache: bool = True) -> Tensor:
        x = as_tensor(x, self.weights.dtype)
        xd = x.data
        self._check_input(xd)
        k, s, p = self.kernel_size, self.stride, self.padding
        n, c, h, w = xd.shape
        if p > 0:
            xd = np.pad(xd, ((0, 0), (0, 0), (p, p), (p, p)))
        oh = (h + 2 * p - k) // s + 1
        ow = (w + 2 * p - k) // s + 1
        windows = np.lib.stride_tricks.sliding_window_view(xd, (k, k), axis=(2, 3))
        windows = windows[:, :, ::s, ::s]  # (N, C, oh, ow, k, k)
        cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(n * oh * ow, c * k * k)
        wmat = self.weights.data.reshape(self.out_channels, c * k * k)
        out = cols @ wmat.T + self.bias.data
        out = out.reshape(n, oh, ow, self.out_channels).transpose(0, 3, 1, 2)
        self._push_cache((cols, (n, c, h, w), (oh, ow)), cache)
        return Tensor(np.ascontiguousarray(out))

    def backward(self, grad_out: Tensor) -> Tensor:
        cols, (n, c, h, w), (oh, ow) = self._take_cache()
        k, s, p = self.kernel_size, self.stride, self.padding
        g = as_tensor(grad_out).data
        if g.shape != (n, self.out_channels, oh, ow):
            raise UsageError(f"grad_out shape {g.shape} does not match forward output")
        gmat = g.transpose(0, 2, 3, 1).reshape(n * oh * ow, self.out_channels)
        wmat = self.weights.data.reshape(self.out_channels, c * k * k)

        self.weights.add_grad((gmat.T @ cols).reshape(self.weights.shape))
        self.bias.add_grad(gmat.sum(axis=0))

        dcols = (gmat @ wmat).reshape(n, oh, ow, c, k, k).transpose(0, 3, 1, 2, 4, 5)
        dxp = np.zeros((n, c, h + 2 * p, w + 2 * p), dtype=g.dtype)
        for i in range(k):
            for j in range(k):
                dxp[:, :, i:i + s * (oh - 1) + 1:s, j:j + s * (ow - 1) + 1:s] += dcols[:, :, :, :, i, j]
        if p > 0:
            dxp = dxp[:, :, p:-p, p:-p]
        return Tensor(np.ascontiguousarray(dxp))


class FullyConnected(Layer):
    """Dense layer: output = input @ weights + bias, weights shaped (D, M)."""

    def __init__(self, in_dim: int, out_dim: int, *,
                 rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.weights = Tensor(kaiming_uniform(rng, (in_dim, out_dim), in_dim, dtype))
        self.bias = Tensor(np.zeros(out_dim, dtype=dtype))

    def parameters(self) -> list[Tensor]:
        return [self.weights, self.bias]

    def forward(self, x: Tensor, cache: bool = True) -> Tensor:
        x = as_tensor(x, self.weights.dtype)
        xd = x.data
        if xd.ndim != 2 or xd.shape[1] != self.in_dim:
            raise ConfigError(f"FullyConnected expects (N,{self.in_dim}), got {xd.shape}")
        self._push_cache(xd, cache)
        return Tensor(xd @ self.weights.data + self.bias.data)

    def backward(self, grad_out: Tensor) -> Tensor:
        xd = self._take_cache()
        g = as_tensor(grad_out).data
        if g.shape != (xd.shape[0], self.out_dim):
            raise UsageError(f"grad_out shape {g.shape} does not match forward output")
        self.weights.add_grad(xd.T @ g)
        self.bias.add_grad(g.sum(axis=0))
        return Tensor(g @ self.weights.data.T)


class ReLU(Layer):
    def forward(self, x: Tensor, cache: bool = True) -> Tensor:
        xd = as_tensor(x).data
        mask = xd > 0
        self._push_cache(mask, cache)
        return Tensor(np.where(mask, xd, 0.0).astype(xd.dtype))

    def backward(self, grad_out: Tensor) -> Tensor:
        mask = self._take_cache()
        g = as_tensor(grad_out).data
        return Tensor(np.where(mask, g, 0.0).astype(g.dtype))


class MaxPool2D(Layer):
    """Max pooling; backward routes gradient to the first row-major maximum."""

    def __init__(self, size: int = 2, stride: int | None = None):
        super().__init__()
        self.size = size
        self.stride = stride if stride is not None else size

    def forward(self, x: Tensor, cache: bool = True) -> Tensor:
        xd = as_tensor(x).data
        if xd.ndim != 4:
            raise ConfigError(f"MaxPool2D expects NCHW input, got {xd.shape}")
        k, s = self.size, self.stride
        n, c, h, w = xd.shape
        if h < k or w < k:
            raise ConfigError(f"pool window {k} larger than input {xd.shape}")
        oh = (h - k) // s + 1
        ow = (w - k) // s + 1
        windows = np.lib.stride_tricks.sliding_window_view(xd, (k, k), axis=(2, 3))
        windows = windows[:, :, ::s, ::s].reshape(n, c, oh, ow, k * k)
        # np.argmax picks the first maximum, i.e. row-major tie-break
        argmax = windows.argmax(axis=-1)
        out = np.take_along_axis(windows, argmax[..., None], axis=-1)[..., 0]
        self._push_cache((argmax, (n, c, h, w), (oh, ow)), cache)
        return Tensor(np.ascontiguousarray(out))

    def backward(self, grad_out: Tensor) -> Tensor:
        argmax, (n, c, h, w), (oh, ow) = self._take_cache()
        k, s = self.size, self.stride
        g = as_tensor(grad_out).data
        if g.shape != (n, c, oh, ow):
            raise UsageError(f"grad_out shape {g.shape} does not match forward output")
        dx = np.zeros((n, c, h, w), dtype=g.dtype)
        ni, ci, oi, oj = np.indices((n, c, oh, ow))
        rows = oi * s + argmax // k
        cols = oj * s + argmax % k
        np.add.at(dx, (ni, ci, rows, cols), g)
        return Tensor(dx)


class Flatten(Layer):
    def forward(self, x: Tensor, cache: bool = True) -> Tensor:
        xd = as_tensor(x).data
        self._push_cache(xd.shape, cache)
        return Tensor(xd.reshape(xd.shape[0], -1))

    def backward(self, grad_out: Tensor) -> Tensor:
        shape = self._take_cache()
        return Tensor(as_tensor(grad_out).data.reshape(shape))


def grl_forward(x: Tensor) -> Tensor:
    """Gradient-reversal forward pass: bit-identical to the input."""
    return as_tensor(x)


def grl_backward(grad_out: Tensor, lam: float) -> Tensor:
    """Gradient-reversal backward pass: exactly -lam * grad_out."""
    if lam < 0:
        raise UsageError("gradient-reversal coefficient must be >= 0")
    g = as_tensor(grad_out).data
    if lam == 0.0:
        return Tensor(np.zeros_like(g))
    return Tensor(g * g.dtype.type(-lam))


class GradientReversal(Layer):
    """Identity forward; backward multiplies the gradient by ``-lam``.

    ``lam`` is mutable so a training loop can anneal it between steps.
    """

    def __init__(self, lam: float = 1.0):
        super().__init__()
        self.lam = lam

    def forward(self, x: Tensor, cache: bool = True) -> Tensor:
        self._push_cache(True, cache)
        return grl_forward(x)

    def backward(self, grad_out: Tensor) -> Tensor:
        self._take_cache()
        return grl_backward(grad_out, self.lam)


class Softmax(Layer):
    """Row-wise softmax over the last axis, max-stabilized."""

    def forward(self, x: Tensor, cache: bool = True) -> Tensor:
        xd = as_tensor(x).data
        shifted = xd - xd.max(axis=-1, keepdims=True)
        e = np.exp(shifted)
        y = e / e.sum(axis=-1, keepdims=True)
        self._push_cache(y, cache)
        return Tensor(y)

    def backward(self, grad_out: Tensor) -> Tensor:
        y = self._take_cache()
        g = as_tensor(grad_out).data
        inner = (g * y).sum(axis=-1, keepdims=True)
        return Tensor(y * (g - inner))


def run_forward(layers: list[Layer], x: Tensor, cache: bool = True) -> Tensor:
    for layer in layers:
        x = layer.forward(x, cache=cache)
    return x


def run_backward(layers: list[Layer], grad: Tensor) -> Tensor:
    for layer in reversed(layers):
        grad = layer.backward(grad)
    return grad


def stack_parameters(layers: list[Layer]) -> list[Tensor]:
    params: list[Tensor] = []
    for layer in layers:
        params.extend(layer.parameters())
    return params
