"""Softmax and the mean cross-entropy loss over a batch of logits."""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from .tensor import Tensor


def softmax(logits: Tensor) -> Tensor:
    """Row-wise softmax of (N, C) logits, computed with max subtraction.

    NaN inputs propagate NaN through the corresponding row.
    """
    z = logits.data
    if z.ndim != 2 or z.shape[1] < 2:
        raise ShapeError(f"softmax expects (N, C) with C >= 2, got {z.shape}")
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return Tensor(e / e.sum(axis=1, keepdims=True))


def cross_entropy_loss(logits: Tensor, labels) -> tuple[float, np.ndarray]:
    """Mean negative log softmax probability of the true class.

    Returns (loss, grad_logits) with grad_logits = (softmax - onehot) / N.
    """
    z = logits.data
    if z.ndim != 2:
        raise ShapeError(f"cross entropy expects (N, C) logits, got {z.shape}")
    n, c = z.shape
    labels = np.asarray(labels)
    if labels.shape != (n,):
        raise ShapeError(f"labels must have shape ({n},), got {labels.shape}")
    if labels.min() < 0 or labels.max() >= c:
        raise ValueError(f"labels must lie in [0, {c}), got range "
                         f"[{labels.min()}, {labels.max()}]")
    labels = labels.astype(np.intp)

    shifted = z - z.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(shifted).sum(axis=1))
    per_sample = logsumexp - shifted[np.arange(n), labels]
    loss = float(per_sample.mean())

    probs = np.exp(shifted - logsumexp[:, None])
    probs[np.arange(n), labels] -= 1.0
    grad = probs / n
    return loss, grad
