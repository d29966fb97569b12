"""Dense float64 tensor with an optional gradient buffer.

All layer math in this package runs in 64-bit floats so that analytic
gradients can be checked tightly against central finite differences.
"""

from __future__ import annotations

import numpy as np


class Tensor:
    """A contiguous row-major float64 array plus an optional grad buffer.

    ``data`` holds the values; ``grad``, when allocated, always has the
    same shape as ``data``. Parameters are Tensors with grad buffers;
    activations are Tensors without them.
    """

    __slots__ = ("data", "grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.ascontiguousarray(data, dtype=np.float64)
        self.grad = np.zeros_like(self.data) if requires_grad else None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def ensure_grad(self) -> np.ndarray:
        """Allocate the gradient buffer if absent and return it."""
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        return self.grad

    def zero_grad(self) -> None:
        if self.grad is not None:
            self.grad.fill(0.0)

    def copy(self) -> "Tensor":
        out = Tensor(self.data.copy())
        if self.grad is not None:
            out.grad = self.grad.copy()
        return out

    def __repr__(self) -> str:
        has_grad = self.grad is not None
        return f"Tensor(shape={self.shape}, grad={'yes' if has_grad else 'no'})"


def as_array(x) -> np.ndarray:
    """Return the underlying float64 array of a Tensor or array-like."""
    if isinstance(x, Tensor):
        return x.data
    return np.asarray(x, dtype=np.float64)
