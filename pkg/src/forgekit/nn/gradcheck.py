"""Finite-difference gradient oracle and the per-layer check suite.

The oracle is deliberately independent of the backward passes it verifies:
it only calls ``forward`` while nudging one coordinate at a time.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import NumericError, UsageError
from .layers import (Conv2D, Flatten, FullyConnected, GradientReversal,
                     MaxPool2D, ReLU, Softmax, grl_backward, grl_forward)
from .losses import softmax_cross_entropy
from .tensor import Tensor


def finite_difference_gradient(loss_fn: Callable[[], float],
                               params: list[Tensor],
                               epsilon: float) -> list[np.ndarray]:
    """Central-difference gradient of ``loss_fn`` w.r.t. every coordinate.

    Parameters are perturbed in place and restored; ``loss_fn`` takes no
    arguments and must re-evaluate the loss from the current parameter
    values on every call.
    """
    if epsilon <= 0:
        raise UsageError("epsilon must be positive")
    grads = []
    for p in params:
        flat = p.data.reshape(-1)
        g = np.zeros(flat.shape, dtype=np.float64)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + epsilon
            plus = loss_fn()
            flat[i] = orig - epsilon
            minus = loss_fn()
            flat[i] = orig
            if not (np.isfinite(plus) and np.isfinite(minus)):
                raise NumericError("non-finite loss during finite differencing")
            g[i] = (plus - minus) / (2.0 * epsilon)
        grads.append(g.reshape(p.data.shape))
    return grads


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Norm-ratio error: ||a - n|| / max(||a||, ||n||, tiny)."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = max(np.linalg.norm(a), np.linalg.norm(n), 1e-12)
    return float(np.linalg.norm(a - n) / denom)


def default_epsilon(dtype) -> float:
    return 1e-3 if np.dtype(dtype) == np.float32 else 1e-6


def default_tolerance(dtype) -> float:
    return 1e-3 if np.dtype(dtype) == np.float32 else 1e-6


def _move_off_relu_kink(x: np.ndarray, margin: float) -> np.ndarray:
    near = np.abs(x) < margin
    return np.where(near, x + 2.0 * margin, x)


def _separate_window_maxima(x: np.ndarray, size: int, stride: int, margin: float) -> np.ndarray:
    """Bump each pooling window's maximum so no runner-up sits within margin."""
    out = x.copy()
    n, c, h, w = out.shape
    oh = (h - size) // stride + 1
    ow = (w - size) // stride + 1
    for bn in range(n):
        for bc in range(c):
            for i in range(oh):
                for j in range(ow):
                    win = out[bn, bc, i * stride:i * stride + size, j * stride:j * stride + size]
                    flat = win.reshape(-1)
                    order = np.argsort(flat)
                    if flat[order[-1]] - flat[order[-2]] < margin:
                        flat[order[-1]] += 2.0 * margin
    return out


@dataclass
class GradCheckRow:
    layer: str
    cases: int
    max_rel_err: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_err <= self.tolerance


def _check_layer_case(layer, x: np.ndarray, epsilon: float) -> float:
    """Max relative error between analytic and numeric grads for one case."""
    xt = Tensor(x)
    out = layer.forward(Tensor(xt.data))
    rng = np.random.default_rng(zlib.crc32(repr(out.data.shape).encode()))
    proj = rng.standard_normal(out.shape).astype(np.float64)

    def loss_fn() -> float:
        y = layer.forward(Tensor(xt.data)).data
        return float(np.sum(y.astype(np.float64) * proj))

    for p in layer.parameters():
        p.zero_grad()
    layer.forward(Tensor(xt.data))
    grad_in = layer.backward(Tensor(proj.astype(x.dtype)))

    params = [xt] + layer.parameters()
    numeric = finite_difference_gradient(loss_fn, params, epsilon)
    analytic = [grad_in.data] + [p.grad for p in layer.parameters()]
    return max(relative_error(a, n) for a, n in zip(analytic, numeric))


def _conv_cases(rng, dtype, n_cases):
    errs = []
    eps = default_epsilon(dtype)
    for _ in range(n_cases):
        n = int(rng.integers(1, 3))
        c = int(rng.integers(1, 4))
        k = int(rng.integers(1, 4))
        stride = int(rng.integers(1, 3))
        pad = int(rng.integers(0, 2))
        h = int(rng.integers(k + 2, k + 6))
        w = int(rng.integers(k + 2, k + 6))
        out_ch = int(rng.integers(1, 5))
        layer = Conv2D(c, out_ch, k, stride=stride, padding=pad, rng=rng, dtype=dtype)
        x = rng.standard_normal((n, c, h, w)).astype(dtype)
        errs.append(_check_layer_case(layer, x, eps))
    return errs


def _fc_cases(rng, dtype, n_cases):
    errs = []
    eps = default_epsilon(dtype)
    for _ in range(n_cases):
        n = int(rng.integers(1, 5))
        d = int(rng.integers(2, 9))
        m = int(rng.integers(1, 7))
        layer = FullyConnected(d, m, rng=rng, dtype=dtype)
        x = rng.standard_normal((n, d)).astype(dtype)
        errs.append(_check_layer_case(layer, x, eps))
    return errs


def _relu_cases(rng, dtype, n_cases):
    errs = []
    eps = default_epsilon(dtype)
    for _ in range(n_cases):
        shape = tuple(int(rng.integers(1, 6)) for _ in range(int(rng.integers(1, 4))))
        x = rng.standard_normal(shape).astype(dtype)
        x = _move_off_relu_kink(x, 10.0 * eps)
        errs.append(_check_layer_case(ReLU(), x, eps))
    return errs


def _maxpool_cases(rng, dtype, n_cases):
    errs = []
    eps = default_epsilon(dtype)
    for _ in range(n_cases):
        size = int(rng.integers(2, 4))
        stride = int(rng.integers(1, 3))
        n = int(rng.integers(1, 3))
        c = int(rng.integers(1, 3))
        h = int(rng.integers(size + 1, size + 5))
        w = int(rng.integers(size + 1, size + 5))
        x = rng.standard_normal((n, c, h, w)).astype(dtype)
        x = _separate_window_maxima(x, size, stride, 10.0 * eps)
        errs.append(_check_layer_case(MaxPool2D(size, stride), x, eps))
    return errs


def _flatten_cases(rng, dtype, n_cases):
    errs = []
    eps = default_epsilon(dtype)
    for _ in range(n_cases):
        shape = (int(rng.integers(1, 4)), int(rng.integers(1, 4)),
                 int(rng.integers(2, 5)), int(rng.integers(2, 5)))
        x = rng.standard_normal(shape).astype(dtype)
        errs.append(_check_layer_case(Flatten(), x, eps))
    return errs


def _softmax_cases(rng, dtype, n_cases):
    errs = []
    eps = default_epsilon(dtype)
    for _ in range(n_cases):
        shape = (int(rng.integers(1, 5)), int(rng.integers(2, 6)))
        x = rng.standard_normal(shape).astype(dtype)
        errs.append(_check_layer_case(Softmax(), x, eps))
    return errs


def _softmax_ce_cases(rng, dtype, n_cases):
    errs = []
    eps = default_epsilon(dtype)
    for _ in range(n_cases):
        n = int(rng.integers(1, 6))
        k = int(rng.integers(2, 6))
        logits = Tensor(rng.standard_normal((n, k)).astype(dtype))
        labels = rng.integers(0, k, size=n)
        _, grad = softmax_cross_entropy(logits, labels)

        def loss_fn() -> float:
            loss, _ = softmax_cross_entropy(Tensor(logits.data), labels)
            return loss

        numeric = finite_difference_gradient(loss_fn, [logits], eps)[0]
        errs.append(relative_error(grad.data, numeric))
    return errs


def _grl_cases(rng, dtype, n_cases):
    # GRL has an exact contract, so the "error" is the deviation from it.
    errs = []
    for _ in range(n_cases):
        shape = tuple(int(rng.integers(1, 5)) for _ in range(2))
        x = rng.standard_normal(shape).astype(dtype)
        lam = float(rng.uniform(0.0, 2.0))
        fwd = grl_forward(Tensor(x))
        g = rng.standard_normal(shape).astype(dtype)
        bwd = grl_backward(Tensor(g), lam)
        err_fwd = float(np.max(np.abs(fwd.data - x))) if x.size else 0.0
        err_bwd = float(np.max(np.abs(bwd.data + lam * g))) if g.size else 0.0
        errs.append(max(err_fwd, err_bwd))
    return errs


LAYER_CHECKS = {
    "conv2d": _conv_cases,
    "fully_connected": _fc_cases,
    "relu": _relu_cases,
    "maxpool2d": _maxpool_cases,
    "flatten": _flatten_cases,
    "softmax": _softmax_cases,
    "softmax_cross_entropy": _softmax_ce_cases,
    "gradient_reversal": _grl_cases,
}


def layer_gradient_suite(dtype=np.float32, n_cases: int = 10,
                         seed: int = 0) -> list[GradCheckRow]:
    """Run finite-difference checks on random shapes for every layer kind."""
    rows = []
    tol = default_tolerance(dtype)
    for name, fn in LAYER_CHECKS.items():
        rng = np.random.default_rng([seed, zlib.crc32(name.encode())])
        errs = fn(rng, np.dtype(dtype), n_cases)
        rows.append(GradCheckRow(name, len(errs), max(errs), tol))
    return rows
