"""First-order optimizers.

Each optimizer mutates a dict of parameter arrays in place given a matching
dict of gradients, keeping whatever per-parameter state (moments, step
counter) its update rule needs.  Hyperparameter defaults: beta1 = 0.9,
beta2 = 0.999, epsilon = 1e-8, rho = 0.9.
"""

from __future__ import annotations

from typing import Dict

import numpy as np

from ..core import CsiArmError


class UnknownOptimizer(CsiArmError):
    """Optimizer name not in the supported set."""


OPTIMIZER_NAMES = ("sgd", "rmsprop", "adam", "adagrad", "nadam", "adamax")


class Optimizer:
    def __init__(self, lr: float):
        self.lr = float(lr)
        self.t = 0
        self.slots: Dict[str, Dict[str, np.ndarray]] = {}

    def _slot(self, key: str, like: np.ndarray, names) -> Dict[str, np.ndarray]:
        if key not in self.slots:
            self.slots[key] = {n: np.zeros_like(like) for n in names}
        return self.slots[key]

    def update(self, params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray]) -> None:
        self.t += 1
        for key, p in params.items():
            self._apply(key, p, grads[key])

    def _apply(self, key: str, p: np.ndarray, g: np.ndarray) -> None:
        raise NotImplementedError


class SGD(Optimizer):
    def _apply(self, key, p, g):
        p -= self.lr * g


class RMSprop(Optimizer):
    def __init__(self, lr: float, rho: float = 0.9, eps: float = 1e-8):
        super().__init__(lr)
        self.rho, self.eps = rho, eps

    def _apply(self, key, p, g):
        s = self._slot(key, p, ("v",))
        s["v"] *= self.rho
        s["v"] += (1.0 - self.rho) * g * g
        p -= self.lr * g / (np.sqrt(s["v"]) + self.eps)


class Adam(Optimizer):
    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        super().__init__(lr)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps

    def _apply(self, key, p, g):
        s = self._slot(key, p, ("m", "v"))
        s["m"] = self.beta1 * s["m"] + (1.0 - self.beta1) * g
        s["v"] = self.beta2 * s["v"] + (1.0 - self.beta2) * g * g
        m_hat = s["m"] / (1.0 - self.beta1**self.t)
        v_hat = s["v"] / (1.0 - self.beta2**self.t)
        p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class Adagrad(Optimizer):
    def __init__(self, lr: float, eps: float = 1e-8):
        super().__init__(lr)
        self.eps = eps

    def _apply(self, key, p, g):
        s = self._slot(key, p, ("a",))
        s["a"] += g * g
        p -= self.lr * g / (np.sqrt(s["a"]) + self.eps)


class Nadam(Optimizer):
    """Adam with Nesterov momentum: the update uses the look-ahead
    combination beta1*m_hat + (1-beta1)*g_hat."""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        super().__init__(lr)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps

    def _apply(self, key, p, g):
        s = self._slot(key, p, ("m", "v"))
        s["m"] = self.beta1 * s["m"] + (1.0 - self.beta1) * g
        s["v"] = self.beta2 * s["v"] + (1.0 - self.beta2) * g * g
        m_hat = s["m"] / (1.0 - self.beta1 ** (self.t + 1))
        g_hat = g / (1.0 - self.beta1**self.t)
        v_hat = s["v"] / (1.0 - self.beta2**self.t)
        p -= self.lr * (self.beta1 * m_hat + (1.0 - self.beta1) * g_hat) / (
            np.sqrt(v_hat) + self.eps
        )


class Adamax(Optimizer):
    """Adam variant with the infinity norm as the second-moment proxy."""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        super().__init__(lr)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps

    def _apply(self, key, p, g):
        s = self._slot(key, p, ("m", "u"))
        s["m"] = self.beta1 * s["m"] + (1.0 - self.beta1) * g
        s["u"] = np.maximum(self.beta2 * s["u"], np.abs(g))
        p -= (self.lr / (1.0 - self.beta1**self.t)) * s["m"] / (s["u"] + self.eps)


_FACTORIES = {
    "sgd": SGD,
    "rmsprop": RMSprop,
    "adam": Adam,
    "adagrad": Adagrad,
    "nadam": Nadam,
    "adamax": Adamax,
}


def make_optimizer(name: str, lr: float, **kwargs) -> Optimizer:
    try:
        factory = _FACTORIES[name.lower()]
    except KeyError:
        raise UnknownOptimizer(
            f"{name!r}; supported: {', '.join(OPTIMIZER_NAMES)}"
        ) from None
    return factory(lr, **kwargs)
