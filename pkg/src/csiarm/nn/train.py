"""Mini-batch training loop with accuracy-monitored early stopping."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from ..core import CsiArmError
from .model import CnnModel
from .optim import make_optimizer


class EmptyDataset(CsiArmError):
    """Training requires at least one sample."""


@dataclass
class TrainConfig:
    batch_size: int = 16
    max_epochs: int = 50
    patience: int = 6
    optimizer: str = "adam"
    learning_rate: float = 0.001
    seed: int = 0
    val_fraction: float = 0.2  # used only when no validation set is supplied
    shuffle: bool = True
    verbose: bool = False
    # injectable validation metric (model, vX, vy, epoch) -> float; defaults
    # to plain accuracy.  Lets tests drive the early-stopping control flow
    # with scripted metric sequences.
    val_metric: Optional[Callable[[CnnModel, np.ndarray, np.ndarray, int], float]] = None

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.patience < self.max_epochs:
            raise ValueError("patience must be < max_epochs")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("val_fraction must be in (0, 1)")


@dataclass
class History:
    train_loss: List[float] = field(default_factory=list)
    val_accuracy: List[float] = field(default_factory=list)
    best_epoch: int = 0  # 1-indexed
    stopped_epoch: int = 0
    best_val_accuracy: float = float("-inf")

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("epoch,train_loss,val_acc\n")
            for i, (loss, acc) in enumerate(zip(self.train_loss, self.val_accuracy), 1):
                fh.write(f"{i},{loss!r},{acc!r}\n")


def accuracy(preds: np.ndarray, truths: np.ndarray) -> float:
    preds = np.asarray(preds)
    truths = np.asarray(truths)
    return float(np.mean(preds == truths))


def stratified_holdout(
    y: np.ndarray, fraction: float, seed: int
) -> Tuple[np.ndarray, np.ndarray]:
    """Split indices into (rest, held-out) keeping per-class proportions;
    each class contributes at least one held-out sample."""
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    hold: List[np.ndarray] = []
    rest: List[np.ndarray] = []
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        idx = idx[rng.permutation(len(idx))]
        k = max(1, int(round(len(idx) * fraction)))
        hold.append(idx[:k])
        rest.append(idx[k:])
    return np.sort(np.concatenate(rest)), np.sort(np.concatenate(hold))


def _default_val_metric(model: CnnModel, vx: np.ndarray, vy: np.ndarray, epoch: int) -> float:
    return accuracy(model.predict(vx), vy)


def train(
    model: CnnModel,
    X: np.ndarray,
    y: np.ndarray,
    val: Optional[Tuple[np.ndarray, np.ndarray]] = None,
    cfg: Optional[TrainConfig] = None,
) -> History:
    """Train in shuffled mini-batches, monitoring validation accuracy.

    Stops when the monitored accuracy has not strictly improved for
    `patience` consecutive epochs (or at max_epochs) and restores the
    weights of the best epoch.  Fully deterministic given cfg.seed.
    """
    cfg = cfg or TrainConfig()
    X = np.asarray(X)
    y = np.asarray(y)
    if len(X) == 0:
        raise EmptyDataset("no training samples")
    if len(X) != len(y):
        raise ValueError("X and y disagree on sample count")

    if val is None:
        train_idx, val_idx = stratified_holdout(y, cfg.val_fraction, cfg.seed)
        vx, vy = X[val_idx], y[val_idx]
        X, y = X[train_idx], y[train_idx]
        if len(X) == 0:
            raise EmptyDataset("validation split consumed all samples")
    else:
        vx, vy = np.asarray(val[0]), np.asarray(val[1])
        if len(vx) == 0:
            raise EmptyDataset("empty validation set")

    metric = cfg.val_metric or _default_val_metric
    optimizer = make_optimizer(cfg.optimizer, cfg.learning_rate)
    rng = np.random.default_rng(cfg.seed)
    history = History()
    best_weights = model.get_weights()
    since_improve = 0

    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(len(X)) if cfg.shuffle else np.arange(len(X))
        total, seen = 0.0, 0
        for start in range(0, len(X), cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            loss = model.loss_and_grads(X[batch], y[batch], training=True)
            optimizer.update(model.named_params(), model.named_grads())
            total += loss * len(batch)
            seen += len(batch)
        epoch_loss = total / seen
        val_acc = float(metric(model, vx, vy, epoch))
        history.train_loss.append(epoch_loss)
        history.val_accuracy.append(val_acc)
        if cfg.verbose:
            print(f"epoch {epoch:3d}  loss {epoch_loss:.4f}  val_acc {val_acc:.4f}")

        if val_acc > history.best_val_accuracy:
            history.best_val_accuracy = val_acc
            history.best_epoch = epoch
            best_weights = model.get_weights()
            since_improve = 0
        else:
            since_improve += 1
        history.stopped_epoch = epoch
        if since_improve >= cfg.patience:
            break

    model.set_weights(best_weights)
    return history
