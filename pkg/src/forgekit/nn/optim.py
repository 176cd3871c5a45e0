"""Optimizers: bias-corrected Adam and classical SGD with momentum.

Each optimizer owns per-parameter auxiliary buffers that stay
shape-congruent with their parameters; ``step`` consumes ``param.grad``.
"""
from __future__ import annotations

import numpy as np

from ..errors import UsageError
from .tensor import Tensor


class Optimizer:
    def __init__(self, params: list[Tensor], lr: float):
        if lr <= 0:
            raise UsageError("learning rate must be positive")
        self.params = list(params)
        self.lr = lr
        self.step_count = 0

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def _gather_grads(self) -> list[np.ndarray]:
        grads = []
        for p in self.params:
            if p.grad is None:
                raise UsageError("parameter has no gradient; run a backward pass first")
            if p.grad.shape != p.data.shape:
                raise UsageError("gradient buffer is not shape-congruent with its parameter")
            grads.append(p.grad)
        return grads

    def step(self) -> None:
        raise NotImplementedError


class Adam(Optimizer):
    def __init__(self, params: list[Tensor], lr: float = 0.001,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        super().__init__(params, lr)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        grads = self._gather_grads()
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1 ** t
        bc2 = 1.0 - self.beta2 ** t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * np.square(g)
            m_hat = m / bc1
            v_hat = v / bc2
            p.data -= (self.lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(p.data.dtype)


class SGDMomentum(Optimizer):
    """Classical momentum: v <- mu*v - lr*g; p <- p + v."""

    def __init__(self, params: list[Tensor], lr: float = 0.0001, momentum: float = 0.9):
        super().__init__(params, lr)
        if not 0.0 <= momentum < 1.0:
            raise UsageError("momentum must lie in [0, 1)")
        self.momentum = momentum
        self.velocity = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        grads = self._gather_grads()
        self.step_count += 1
        for p, g, v in zip(self.params, grads, self.velocity):
            v *= self.momentum
            v -= self.lr * g
            p.data += v
