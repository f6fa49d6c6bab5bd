"""Optimizer x learning-rate grid search on a fixed split with shared
initial weights, so cells differ only in the update rule."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .model import ModelConfig, build_model
from .optim import OPTIMIZER_NAMES
from .train import TrainConfig, stratified_holdout, train

# 0.001 plus the 0.01-step ladder 0.01 ... 0.1
DEFAULT_GRID_LRS = (0.001,) + tuple(round(0.01 * i, 2) for i in range(1, 11))


@dataclass
class GridCell:
    optimizer: str
    lr: float
    val_accuracy: float = float("nan")
    status: str = "ok"  # "ok" | "failed"
    epochs_run: int = 0
    error: str = ""


@dataclass
class GridReport:
    cells: List[GridCell] = field(default_factory=list)
    optimizers: Tuple[str, ...] = ()
    lrs: Tuple[float, ...] = ()

    def cell(self, optimizer: str, lr: float) -> GridCell:
        for c in self.cells:
            if c.optimizer == optimizer and c.lr == lr:
                return c
        raise KeyError((optimizer, lr))

    def best(self) -> GridCell:
        ok = [c for c in self.cells if c.status == "ok"]
        if not ok:
            raise ValueError("every grid cell failed")
        return max(ok, key=lambda c: c.val_accuracy)

    def table(self) -> str:
        """Plain-text accuracy grid, optimizers as rows, lrs as columns."""
        width = 8
        header = "optimizer".ljust(10) + "".join(
            f"{lr:>{width}.3f}" for lr in self.lrs
        )
        lines = [header]
        for name in self.optimizers:
            row = name.ljust(10)
            for lr in self.lrs:
                c = self.cell(name, lr)
                row += (
                    f"{'fail':>{width}}"
                    if c.status != "ok"
                    else f"{100.0 * c.val_accuracy:>{width}.2f}"
                )
            lines.append(row)
        return "\n".join(lines)

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("optimizer,lr,val_accuracy,status,epochs_run\n")
            for c in self.cells:
                fh.write(
                    f"{c.optimizer},{c.lr!r},{c.val_accuracy!r},{c.status},{c.epochs_run}\n"
                )


def grid_search(
    X: np.ndarray,
    y: np.ndarray,
    model_config: Optional[ModelConfig] = None,
    train_config: Optional[TrainConfig] = None,
    optimizers: Sequence[str] = OPTIMIZER_NAMES,
    lrs: Sequence[float] = DEFAULT_GRID_LRS,
    val: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> GridReport:
    """Train one model per (optimizer, lr) cell.

    All cells start from identical initial weights and see the identical
    train/validation split, so results are independent of execution order.
    A failing cell is recorded and skipped, never fatal.
    """
    if not lrs:
        raise ValueError("lr list must be non-empty")
    model_config = model_config or ModelConfig()
    base_cfg = train_config or TrainConfig()

    X = np.asarray(X)
    y = np.asarray(y)
    if val is None:
        train_idx, val_idx = stratified_holdout(y, base_cfg.val_fraction, base_cfg.seed)
        fixed_val = (X[val_idx], y[val_idx])
        X, y = X[train_idx], y[train_idx]
    else:
        fixed_val = (np.asarray(val[0]), np.asarray(val[1]))

    init_weights = build_model(model_config).get_weights()

    report = GridReport(optimizers=tuple(optimizers), lrs=tuple(lrs))
    for name in optimizers:
        for lr in lrs:
            cell = GridCell(optimizer=name, lr=float(lr))
            try:
                model = build_model(model_config)
                model.set_weights(init_weights)
                cfg = dataclasses.replace(base_cfg, optimizer=name, learning_rate=float(lr))
                history = train(model, X, y, val=fixed_val, cfg=cfg)
                cell.val_accuracy = history.best_val_accuracy
                cell.epochs_run = history.stopped_epoch
            except Exception as exc:  # cell fails, search continues
                cell.status = "failed"
                cell.error = f"{type(exc).__name__}: {exc}"
            report.cells.append(cell)
    return report
