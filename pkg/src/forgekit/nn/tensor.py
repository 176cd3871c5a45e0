"""Dense float tensors with an optional paired gradient buffer."""
from __future__ import annotations

import numpy as np

from ..errors import NumericError, UsageError

FLOAT_DTYPES = (np.float32, np.float64)


class Tensor:
    """A contiguous n-dimensional float array plus an optional gradient.

    ``data`` is always C-contiguous float32 or float64. ``grad``, when
    present, has identical shape and dtype. This is the unit of all numeric
    computation; layers read ``data`` and accumulate into ``grad``.
    """

    __slots__ = ("data", "grad")

    def __init__(self, data, dtype=None):
        arr = np.ascontiguousarray(data, dtype=dtype)
        if arr.dtype not in FLOAT_DTYPES:
            arr = arr.astype(np.float32)
        self.data: np.ndarray = arr
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def zero_grad(self) -> None:
        """Reset the gradient buffer to zeros (allocating it if needed)."""
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        else:
            self.grad.fill(0.0)

    def add_grad(self, delta: np.ndarray) -> None:
        """Accumulate ``delta`` into the gradient buffer."""
        if delta.shape != self.data.shape:
            raise UsageError(
                f"gradient shape {delta.shape} does not match parameter shape {self.data.shape}"
            )
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += delta

    def assert_finite(self, what: str = "tensor") -> "Tensor":
        """Raise :class:`NumericError` if any value is NaN or infinite."""
        if not np.all(np.isfinite(self.data)):
            raise NumericError(f"non-finite values in {what}")
        return self

    def copy(self) -> "Tensor":
        t = Tensor(self.data.copy())
        if self.grad is not None:
            t.grad = self.grad.copy()
        return t

    def astype(self, dtype) -> "Tensor":
        return Tensor(self.data.astype(dtype))

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype.name})"


def as_tensor(value, dtype=None) -> Tensor:
    """Coerce an array-like or Tensor to a Tensor, copying only if needed."""
    if isinstance(value, Tensor):
        if dtype is None or value.dtype == np.dtype(dtype):
            return value
        return value.astype(dtype)
    return Tensor(value, dtype=dtype)
