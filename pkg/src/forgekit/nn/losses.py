"""Classification loss: fused softmax + categorical cross-entropy."""
from __future__ import annotations

import numpy as np

from ..errors import DataError, NumericError
from .tensor import Tensor, as_tensor


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray) -> tuple[float, Tensor]:
    """Mean cross-entropy of softmax(logits) against integer labels.

    Returns ``(loss, grad_logits)`` where ``grad_logits`` is
    ``(softmax - onehot) / N``. Stabilized by max-subtraction so large
    logits cannot overflow.
    """
    z = as_tensor(logits).data
    y = np.asarray(labels, dtype=np.int64)
    if z.ndim != 2 or y.shape != (z.shape[0],):
        raise DataError(f"logits {z.shape} and labels {y.shape} are incompatible")
    n, k = z.shape
    if np.any(y < 0) or np.any(y >= k):
        raise DataError(f"labels must lie in [0, {k})")

    shifted = z - z.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(shifted).sum(axis=1))
    loss = float(np.mean(logsumexp - shifted[np.arange(n), y]))
    if not np.isfinite(loss):
        raise NumericError("non-finite cross-entropy loss")

    probs = np.exp(shifted - logsumexp[:, None])
    probs[np.arange(n), y] -= 1.0
    grad = (probs / n).astype(z.dtype)
    return loss, Tensor(grad)
