"""Network layers with explicit forward/backward passes.

Tensors are NHWC: (batch, height, width, channels).  Convolutions are
cross-correlations (no kernel flip), evaluated by unrolling windows into a
matrix (im2col) and multiplying.  Each layer stores its parameters in
`params` and, after backward, the matching gradients in `grads`; backward
returns the gradient with respect to the layer input.

Layers preserve the dtype of their inputs, so the same code runs in
float32 for training and float64 for finite-difference checks.
"""

from __future__ import annotations

from typing import Dict, Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import as_strided

from ..core import CsiArmError


class ShapeMismatch(CsiArmError):
    """Input shape inconsistent with the layer's expectations."""


def _he_uniform(rng: np.random.Generator, shape, fan_in: int, dtype) -> np.ndarray:
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


def _window_view(x: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    """(n, oh, ow, kh, kw, c) sliding-window view of an NHWC tensor."""
    n, h, w, c = x.shape
    oh = (h - kh) // stride + 1
    ow = (w - kw) // stride + 1
    sn, sh, sw, sc = x.strides
    return as_strided(
        x,
        shape=(n, oh, ow, kh, kw, c),
        strides=(sn, sh * stride, sw * stride, sh, sw, sc),
        writeable=False,
    )


def _scatter_windows(grad_windows: np.ndarray, x_shape, stride: int) -> np.ndarray:
    """Inverse of _window_view: accumulate per-window gradients back onto
    the input grid (correct for overlapping and truncated-edge windows)."""
    n, oh, ow, kh, kw, c = grad_windows.shape
    grad_x = np.zeros(x_shape, dtype=grad_windows.dtype)
    for i in range(kh):
        for j in range(kw):
            grad_x[:, i : i + oh * stride : stride, j : j + ow * stride : stride, :] += (
                grad_windows[:, :, :, i, j, :]
            )
    return grad_x


class Conv2D:
    """2-D convolution, valid padding by default, with optional l1/l2
    penalties on the kernel (applied to the kernel gradient and exposed as
    a loss term)."""

    def __init__(
        self,
        in_channels: int,
        filters: int,
        kernel_size: int = 3,
        stride: int = 1,
        padding: int = 0,
        l1: float = 0.0,
        l2: float = 0.0,
        rng: Optional[np.random.Generator] = None,
        dtype=np.float32,
    ):
        rng = rng or np.random.default_rng(0)
        k = int(kernel_size)
        self.stride = int(stride)
        self.padding = int(padding)
        self.l1 = float(l1)
        self.l2 = float(l2)
        fan_in = k * k * in_channels
        self.params: Dict[str, np.ndarray] = {
            "kernel": _he_uniform(rng, (k, k, in_channels, filters), fan_in, dtype),
            "bias": np.zeros(filters, dtype=dtype),
        }
        self.grads: Dict[str, np.ndarray] = {}
        self._cache = None

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        kernel = self.params["kernel"]
        kh, kw, cin, cout = kernel.shape
        if x.ndim != 4 or x.shape[3] != cin:
            raise ShapeMismatch(f"expected (n, h, w, {cin}), got {x.shape}")
        if self.padding:
            p = self.padding
            x = np.pad(x, ((0, 0), (p, p), (p, p), (0, 0)))
        if x.shape[1] < kh or x.shape[2] < kw:
            raise ShapeMismatch(f"input {x.shape[1:3]} smaller than kernel {kh}x{kw}")
        windows = _window_view(x, kh, kw, self.stride)
        n, oh, ow = windows.shape[:3]
        cols = windows.reshape(n * oh * ow, kh * kw * cin)
        out = cols @ kernel.reshape(kh * kw * cin, cout).astype(x.dtype)
        out += self.params["bias"].astype(x.dtype)
        self._cache = (x.shape, cols, (n, oh, ow))
        return out.reshape(n, oh, ow, cout)

    def backward(self, upstream: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise ShapeMismatch("backward before forward")
        x_shape, cols, (n, oh, ow) = self._cache
        kernel = self.params["kernel"]
        kh, kw, cin, cout = kernel.shape
        if upstream.shape != (n, oh, ow, cout):
            raise ShapeMismatch(
                f"upstream {upstream.shape} != forward output {(n, oh, ow, cout)}"
            )
        upm = upstream.reshape(n * oh * ow, cout)

        grad_kernel = (cols.T @ upm).reshape(kernel.shape).astype(np.float64)
        if self.l1:
            grad_kernel += self.l1 * np.sign(kernel)
        if self.l2:
            grad_kernel += 2.0 * self.l2 * kernel
        self.grads["kernel"] = grad_kernel.astype(kernel.dtype)
        self.grads["bias"] = upm.sum(axis=0).astype(kernel.dtype)

        grad_cols = upm @ kernel.reshape(kh * kw * cin, cout).T.astype(upm.dtype)
        grad_windows = grad_cols.reshape(n, oh, ow, kh, kw, cin)
        grad_x = _scatter_windows(grad_windows, x_shape, self.stride)
        if self.padding:
            p = self.padding
            grad_x = grad_x[:, p:-p, p:-p, :]
        return grad_x

    def regularization_loss(self) -> float:
        k = self.params["kernel"].astype(np.float64)
        return self.l1 * float(np.abs(k).sum()) + self.l2 * float((k**2).sum())


class MaxPool2D:
    """Window maxima; backward routes the upstream gradient to each
    window's argmax (first occurrence on ties)."""

    def __init__(self, pool: int = 2, stride: Optional[int] = None):
        self.pool = int(pool)
        self.stride = int(stride) if stride is not None else self.pool
        self.params: Dict[str, np.ndarray] = {}
        self.grads: Dict[str, np.ndarray] = {}
        self._cache = None

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        if x.ndim != 4:
            raise ShapeMismatch(f"expected NHWC tensor, got {x.shape}")
        if x.shape[1] < self.pool or x.shape[2] < self.pool:
            raise ShapeMismatch(f"input {x.shape[1:3]} smaller than pool {self.pool}")
        windows = _window_view(x, self.pool, self.pool, self.stride)
        n, oh, ow = windows.shape[:3]
        c = x.shape[3]
        flat = windows.reshape(n, oh, ow, self.pool * self.pool, c)
        idx = flat.argmax(axis=3)  # first occurrence on ties
        out = np.take_along_axis(flat, idx[:, :, :, None, :], axis=3)[:, :, :, 0, :]
        self._cache = (x.shape, idx, (n, oh, ow, c))
        return out

    def backward(self, upstream: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise ShapeMismatch("backward before forward")
        x_shape, idx, (n, oh, ow, c) = self._cache
        if upstream.shape != (n, oh, ow, c):
            raise ShapeMismatch(
                f"upstream {upstream.shape} != forward output {(n, oh, ow, c)}"
            )
        grad_flat = np.zeros((n, oh, ow, self.pool * self.pool, c), dtype=upstream.dtype)
        np.put_along_axis(grad_flat, idx[:, :, :, None, :], upstream[:, :, :, None, :], axis=3)
        grad_windows = grad_flat.reshape(n, oh, ow, self.pool, self.pool, c)
        return _scatter_windows(grad_windows, x_shape, self.stride)


class Dense:
    """Affine map y = x W + b."""

    def __init__(
        self,
        in_features: int,
        units: int,
        rng: Optional[np.random.Generator] = None,
        dtype=np.float32,
    ):
        rng = rng or np.random.default_rng(0)
        self.params = {
            "weight": _he_uniform(rng, (in_features, units), in_features, dtype),
            "bias": np.zeros(units, dtype=dtype),
        }
        self.grads: Dict[str, np.ndarray] = {}
        self._cache = None

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        w = self.params["weight"]
        if x.ndim != 2 or x.shape[1] != w.shape[0]:
            raise ShapeMismatch(f"expected (n, {w.shape[0]}), got {x.shape}")
        self._cache = x
        return x @ w.astype(x.dtype) + self.params["bias"].astype(x.dtype)

    def backward(self, upstream: np.ndarray) -> np.ndarray:
        x = self._cache
        if x is None:
            raise ShapeMismatch("backward before forward")
        w = self.params["weight"]
        if upstream.shape != (x.shape[0], w.shape[1]):
            raise ShapeMismatch(
                f"upstream {upstream.shape} != output {(x.shape[0], w.shape[1])}"
            )
        self.grads["weight"] = (x.T @ upstream).astype(w.dtype)
        self.grads["bias"] = upstream.sum(axis=0).astype(w.dtype)
        return upstream @ w.T.astype(upstream.dtype)


class ReLU:
    def __init__(self):
        self.params: Dict[str, np.ndarray] = {}
        self.grads: Dict[str, np.ndarray] = {}
        self._mask = None

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        self._mask = x > 0
        return np.where(self._mask, x, 0)

    def backward(self, upstream: np.ndarray) -> np.ndarray:
        if self._mask is None or upstream.shape != self._mask.shape:
            raise ShapeMismatch("upstream shape does not match forward input")
        return np.where(self._mask, upstream, 0)


class Dropout:
    """Inverted dropout: at training time zero each unit with probability p
    and scale survivors by 1/(1-p); identity at inference."""

    def __init__(self, p: float = 0.5, rng: Optional[np.random.Generator] = None):
        if not 0.0 <= p < 1.0:
            raise ValueError("dropout probability must be in [0, 1)")
        self.p = float(p)
        self.rng = rng or np.random.default_rng(0)
        self.params: Dict[str, np.ndarray] = {}
        self.grads: Dict[str, np.ndarray] = {}
        self._scale_mask = None

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        if not training or self.p == 0.0:
            self._scale_mask = None
            return x
        keep = self.rng.random(x.shape) >= self.p
        self._scale_mask = keep.astype(x.dtype) / (1.0 - self.p)
        return x * self._scale_mask

    def backward(self, upstream: np.ndarray) -> np.ndarray:
        if self._scale_mask is None:
            return upstream
        if upstream.shape != self._scale_mask.shape:
            raise ShapeMismatch("upstream shape does not match forward input")
        return upstream * self._scale_mask


class Flatten:
    def __init__(self):
        self.params: Dict[str, np.ndarray] = {}
        self.grads: Dict[str, np.ndarray] = {}
        self._shape: Optional[Tuple[int, ...]] = None

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, upstream: np.ndarray) -> np.ndarray:
        if self._shape is None:
            raise ShapeMismatch("backward before forward")
        return upstream.reshape(self._shape)
