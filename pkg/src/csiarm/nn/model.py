"""The classifier network and its checkpoint container.

Topology: Conv -> MaxPool -> Conv -> MaxPool -> Conv -> Flatten ->
Dense(ReLU) -> Dropout -> Dense(n_classes), trained with softmax
cross-entropy.  Layer sizes are configuration, not structure.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..pipeline import NormStats
from .layers import Conv2D, Dense, Dropout, Flatten, MaxPool2D, ReLU, ShapeMismatch
from .losses import softmax, softmax_crossentropy, to_one_hot


@dataclass
class ModelConfig:
    input_height: int = 300
    input_width: int = 234
    conv_filters: Tuple[int, int, int] = (16, 32, 64)
    kernel_size: int = 3
    pool_size: int = 2
    dense_units: int = 128
    dropout: float = 0.5
    n_classes: int = 4
    l1: float = 1e-4
    l2: float = 1e-4
    seed: int = 0
    dtype: str = "float32"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["conv_filters"] = tuple(d["conv_filters"])
        return cls(**d)


def _conv_out(size: int, k: int) -> int:
    return size - k + 1


def _pool_out(size: int, p: int) -> int:
    return (size - p) // p + 1


class CnnModel:
    """Fixed conv/pool/dense topology with explicit backprop."""

    def __init__(self, config: ModelConfig):
        self.config = config
        dtype = np.dtype(config.dtype)
        rng = np.random.default_rng(config.seed)
        k, p = config.kernel_size, config.pool_size
        f1, f2, f3 = config.conv_filters

        h, w = config.input_height, config.input_width
        h, w = _conv_out(h, k), _conv_out(w, k)
        h, w = _pool_out(h, p), _pool_out(w, p)
        h, w = _conv_out(h, k), _conv_out(w, k)
        h, w = _pool_out(h, p), _pool_out(w, p)
        h, w = _conv_out(h, k), _conv_out(w, k)
        if h < 1 or w < 1:
            raise ShapeMismatch("input too small for the conv/pool stack")
        self.flat_features = h * w * f3

        reg = dict(l1=config.l1, l2=config.l2)
        self.layers = [
            Conv2D(1, f1, k, rng=rng, dtype=dtype, **reg),
            MaxPool2D(p),
            Conv2D(f1, f2, k, rng=rng, dtype=dtype, **reg),
            MaxPool2D(p),
            Conv2D(f2, f3, k, rng=rng, dtype=dtype, **reg),
            Flatten(),
            Dense(self.flat_features, config.dense_units, rng=rng, dtype=dtype),
            ReLU(),
            Dropout(config.dropout, rng=np.random.default_rng(rng.integers(2**63))),
            Dense(config.dense_units, config.n_classes, rng=rng, dtype=dtype),
        ]

    # --- parameter plumbing -------------------------------------------------

    def named_params(self) -> Dict[str, np.ndarray]:
        out = {}
        for i, layer in enumerate(self.layers):
            for name, arr in layer.params.items():
                out[f"layer{i}.{name}"] = arr
        return out

    def named_grads(self) -> Dict[str, np.ndarray]:
        out = {}
        for i, layer in enumerate(self.layers):
            for name, arr in layer.grads.items():
                out[f"layer{i}.{name}"] = arr
        return out

    @property
    def param_count(self) -> int:
        return sum(int(a.size) for a in self.named_params().values())

    def get_weights(self) -> Dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.named_params().items()}

    def set_weights(self, weights: Dict[str, np.ndarray]) -> None:
        params = self.named_params()
        if set(weights) != set(params):
            raise ShapeMismatch("weight names do not match the architecture")
        for key, arr in weights.items():
            if params[key].shape != arr.shape:
                raise ShapeMismatch(f"{key}: {arr.shape} != {params[key].shape}")
            params[key][...] = arr

    # --- passes ---------------------------------------------------------------

    def _coerce_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        if x.ndim == 3:
            x = x[..., None]
        if x.ndim != 4 or x.shape[1] != self.config.input_height or x.shape[2] != self.config.input_width or x.shape[3] != 1:
            raise ShapeMismatch(
                f"expected (n, {self.config.input_height}, {self.config.input_width}[, 1]), got {x.shape}"
            )
        return x

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        """Logits for a batch of (n, H, W) or (n, H, W, 1) samples."""
        out = self._coerce_input(x)
        for layer in self.layers:
            out = layer.forward(out, training=training)
        return out

    def backward(self, grad_logits: np.ndarray) -> np.ndarray:
        grad = grad_logits
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def regularization_loss(self) -> float:
        return sum(
            layer.regularization_loss()
            for layer in self.layers
            if isinstance(layer, Conv2D)
        )

    def loss_and_grads(
        self, x: np.ndarray, y: np.ndarray, training: bool = True
    ) -> float:
        """One forward/backward pass; returns the regularized batch loss and
        leaves parameter gradients in the layers."""
        logits = self.forward(x, training=training)
        target = to_one_hot(y, self.config.n_classes, dtype=logits.dtype)
        data_loss, grad = softmax_crossentropy(logits, target)
        self.backward(grad)
        return data_loss + self.regularization_loss()

    def predict_proba(self, x: np.ndarray, batch_size: int = 64) -> np.ndarray:
        x = self._coerce_input(x)
        out = []
        for i in range(0, len(x), batch_size):
            out.append(softmax(self.forward(x[i : i + batch_size], training=False)))
        return np.concatenate(out, axis=0)

    def predict(self, x: np.ndarray, batch_size: int = 64) -> np.ndarray:
        return self.predict_proba(x, batch_size).argmax(axis=1)


def build_model(config: Optional[ModelConfig] = None) -> CnnModel:
    return CnnModel(config or ModelConfig())


# --- checkpoints -----------------------------------------------------------
#
# A checkpoint is a plain .npz archive (zip of .npy arrays, no pickling):
#   config_json  0-d unicode array, JSON of ModelConfig
#   norm_json    0-d unicode array, JSON of the fitted NormStats
#   param/<name> one array per parameter tensor
# ----------------------------------------------------------------------------


def save_checkpoint(path, model: CnnModel, norm_stats: Optional[NormStats] = None) -> None:
    arrays = {f"param/{k}": v for k, v in model.named_params().items()}
    arrays["config_json"] = np.array(json.dumps(model.config.to_dict()))
    norm = norm_stats if norm_stats is not None else NormStats()
    arrays["norm_json"] = np.array(json.dumps(norm.to_dict()))
    np.savez(path, **arrays)


def load_checkpoint(path) -> Tuple[CnnModel, NormStats]:
    with np.load(path, allow_pickle=False) as archive:
        config = ModelConfig.from_dict(json.loads(str(archive["config_json"])))
        norm = NormStats.from_dict(json.loads(str(archive["norm_json"])))
        model = CnnModel(config)
        weights = {
            key[len("param/") :]: archive[key]
            for key in archive.files
            if key.startswith("param/")
        }
    model.set_weights(weights)
    return model, norm
