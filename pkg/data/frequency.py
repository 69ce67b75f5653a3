"""
Training-count frequency bands for the per-band loss analysis
"""
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from data.corpus import Vocab
from errors import ConfigurationError

DEFAULT_BOUNDARIES = (10, 100, 1000, 10000)


def _short(n: float) -> str:
    if math.isinf(n):
        return "inf"
    n = int(n)
    if n >= 1000 and n % 1000 == 0:
        return f"{n // 1000}k"
    return str(n)


@dataclass(frozen=True)
class FrequencyBands:
    """
    Band i covers lower[i] <= train_count < upper[i]. Ids never seen in
    training (count 0) belong to no band and carry band index -1.
    """
    boundaries: tuple[int, ...]
    assignment: np.ndarray  # band index per id

    @property
    def intervals(self) -> list[tuple[int, float]]:
        lowers = (1,) + self.boundaries
        uppers = self.boundaries + (math.inf,)
        return list(zip(lowers, uppers))

    @property
    def labels(self) -> list[str]:
        return [f"[{_short(lo)},{_short(hi)})" for lo, hi in self.intervals]

    def __len__(self):
        return len(self.boundaries) + 1

    def band_of(self, token_id: int) -> int | None:
        band = int(self.assignment[token_id])
        return None if band < 0 else band

    def members(self, band: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == band)


def assign_bands(v: Vocab, boundaries: Sequence[int] = DEFAULT_BOUNDARIES) -> FrequencyBands:
    bounds = tuple(int(b) for b in boundaries)
    if not bounds:
        raise ConfigurationError("band boundaries must not be empty")
    if bounds[0] <= 1:
        raise ConfigurationError(f"the first band boundary must exceed 1, got {bounds[0]}")
    if any(b >= c for b, c in zip(bounds, bounds[1:])):
        raise ConfigurationError(f"band boundaries must be strictly increasing, got {list(bounds)}")
    band = np.searchsorted(np.asarray(bounds), v.counts, side="right")
    band = np.where(v.counts >= 1, band, -1)
    return FrequencyBands(bounds, band.astype(np.int64))
