"""
SGD and Adam over Parameter lists
"""
from typing import Sequence

import numpy as np

from autodiff.tensor import Parameter
from errors import CheckpointError, ConfigurationError


class SGD:
    name = "sgd"

    def __init__(self, params: Sequence[Parameter], lr: float):
        self.params = list(params)
        self.lr = lr
        self.steps = 0

    def step(self):
        for p in self.params:
            p.assign(p.value.values - self.lr * p.grad)
        self.steps += 1

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {}

    def load_state_arrays(self, arrays: dict[str, np.ndarray], steps: int):
        self.steps = steps


class Adam:
    name = "adam"

    def __init__(self, params: Sequence[Parameter], lr: float,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.steps = 0
        self.m = {p.name: np.zeros(p.shape) for p in self.params}
        self.v = {p.name: np.zeros(p.shape) for p in self.params}

    def step(self):
        self.steps += 1
        correction1 = 1.0 - self.beta1 ** self.steps
        correction2 = 1.0 - self.beta2 ** self.steps
        for p in self.params:
            m, v = self.m[p.name], self.v[p.name]
            m *= self.beta1
            m += (1.0 - self.beta1) * p.grad
            v *= self.beta2
            v += (1.0 - self.beta2) * p.grad ** 2
            update = (m / correction1) / (np.sqrt(v / correction2) + self.eps)
            p.assign(p.value.values - self.lr * update)

    def state_arrays(self) -> dict[str, np.ndarray]:
        arrays = {f"adam.m/{name}": arr for name, arr in self.m.items()}
        arrays.update({f"adam.v/{name}": arr for name, arr in self.v.items()})
        return arrays

    def load_state_arrays(self, arrays: dict[str, np.ndarray], steps: int):
        for name in self.m:
            for slot, store in (("m", self.m), ("v", self.v)):
                key = f"adam.{slot}/{name}"
                if key not in arrays:
                    raise CheckpointError(f"optimizer state is missing {key}")
                if arrays[key].shape != store[name].shape:
                    raise CheckpointError(
                        f"optimizer state {key} has shape {arrays[key].shape}, "
                        f"expected {store[name].shape}"
                    )
                store[name] = arrays[key].copy()
        self.steps = steps


def build_optimizer(name: str, params: Sequence[Parameter], lr: float) -> SGD | Adam:
    if name == "sgd":
        return SGD(params, lr)
    if name == "adam":
        return Adam(params, lr)
    raise ConfigurationError(f"unknown optimizer '{name}', expected 'sgd' or 'adam'")
