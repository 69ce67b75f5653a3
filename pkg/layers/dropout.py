"""
Standard and variational (locked) dropout with inverted scaling
"""
from dataclasses import dataclass
from typing import Literal

import numpy as np

from autodiff.tensor import Tensor, mul
from errors import ConfigurationError

DROPOUT_MODES = ("none", "standard", "variational")

Mode = Literal["train", "eval"]


@dataclass(frozen=True)
class DropoutSpec:
    """Dropout mode and rate; rate 0 behaves like mode 'none'"""
    mode: str = "none"
    rate: float = 0.0

    def __post_init__(self):
        if self.mode not in DROPOUT_MODES:
            raise ConfigurationError(
                f"unknown dropout mode '{self.mode}', expected one of {DROPOUT_MODES}"
            )
        if not 0.0 <= self.rate < 1.0:
            raise ConfigurationError(f"dropout rate must lie in [0, 1), got {self.rate}")

    @property
    def active(self) -> bool:
        return self.mode != "none" and self.rate > 0.0


def sample_mask(spec: DropoutSpec, shape: tuple[int, int],
                rng: np.random.Generator) -> np.ndarray:
    """
    Standard: every entry dropped independently.
    Variational: one 1 x d row mask, repeated for every row.
    Survivors are scaled by 1/(1-p) so the expectation is the identity.
    """
    if spec.mode == "none":
        raise ConfigurationError("sample_mask needs a dropout mode other than 'none'")
    if spec.rate >= 1.0:
        raise ConfigurationError(f"dropout rate must be below 1, got {spec.rate}")
    keep = 1.0 - spec.rate
    rows, cols = shape
    if spec.mode == "variational":
        row = (rng.random((1, cols)) >= spec.rate) / keep
        return np.repeat(row, rows, axis=0)
    return (rng.random((rows, cols)) >= spec.rate) / keep


def apply_dropout(x: Tensor, spec: DropoutSpec, mode: Mode,
                  rng: np.random.Generator | None) -> Tensor:
    if mode == "eval" or not spec.active:
        return x
    if rng is None:
        raise ConfigurationError("train-mode dropout needs a random generator")
    return mul(x, Tensor._wrap(sample_mask(spec, x.shape, rng)))
