"""Classification loss."""

from __future__ import annotations

from typing import Tuple

import numpy as np

from .layers import ShapeMismatch


def softmax(logits: np.ndarray) -> np.ndarray:
    """Numerically stable row softmax (max subtraction)."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def to_one_hot(y: np.ndarray, n_classes: int, dtype=np.float64) -> np.ndarray:
    y = np.asarray(y, dtype=np.intp)
    if y.ndim != 1:
        raise ShapeMismatch("labels must be a 1-D integer array")
    if np.any(y < 0) or np.any(y >= n_classes):
        raise ValueError(f"labels out of range [0, {n_classes})")
    out = np.zeros((len(y), n_classes), dtype=dtype)
    out[np.arange(len(y)), y] = 1.0
    return out


def softmax_crossentropy(
    logits: np.ndarray, target: np.ndarray
) -> Tuple[float, np.ndarray]:
    """Mean categorical cross-entropy over the batch and its gradient with
    respect to the logits: (softmax(logits) - target) / batch.

    `target` is one-hot, same shape as logits.
    """
    if logits.shape != target.shape:
        raise ShapeMismatch(f"logits {logits.shape} vs target {target.shape}")
    n = logits.shape[0]
    shifted = logits - logits.max(axis=-1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    log_probs = shifted - log_z
    loss = float(-(target * log_probs).sum() / n)
    grad = (np.exp(log_probs) - target) / n
    return loss, grad.astype(logits.dtype)
