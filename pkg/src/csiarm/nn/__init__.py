from .layers import Conv2D, Dense, Dropout, Flatten, MaxPool2D, ReLU, ShapeMismatch
from .losses import softmax, softmax_crossentropy, to_one_hot
from .model import CnnModel, ModelConfig, build_model, load_checkpoint, save_checkpoint
from .optim import OPTIMIZER_NAMES, UnknownOptimizer, make_optimizer
from .train import EmptyDataset, History, TrainConfig, accuracy, train
from .gridsearch import DEFAULT_GRID_LRS, GridCell, GridReport, grid_search

__all__ = [
    "Conv2D", "Dense", "Dropout", "Flatten", "MaxPool2D", "ReLU", "ShapeMismatch",
    "softmax", "softmax_crossentropy", "to_one_hot",
    "CnnModel", "ModelConfig", "build_model", "load_checkpoint", "save_checkpoint",
    "OPTIMIZER_NAMES", "UnknownOptimizer", "make_optimizer",
    "EmptyDataset", "History", "TrainConfig", "accuracy", "train",
    "DEFAULT_GRID_LRS", "GridCell", "GridReport", "grid_search",
]
