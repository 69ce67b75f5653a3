"""
Result records produced by training and evaluation
"""
import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class EpochRecord:
    """One row of the training log"""
    epoch: int
    train_loss: float  # mean NLL per token
    val_ppl: float
    lr: float
    seconds: float


@dataclass
class TrainingLog:
    records: list[EpochRecord] = field(default_factory=list)
    best_val_ppl: float = math.inf
    best_epoch: int = 0
    total_seconds: float = 0.0

    @property
    def final_lr(self) -> float:
        return self.records[-1].lr if self.records else math.nan


@dataclass
class PerTokenLoss:
    """Aligned (position, target id, NLL) triples over an evaluation split"""
    positions: np.ndarray
    target_ids: np.ndarray
    nll: np.ndarray

    def __len__(self):
        return len(self.nll)

    @property
    def mean(self) -> float:
        return float(self.nll.mean())

    @property
    def perplexity(self) -> float:
        """inf once the mean NLL is past what a float can exponentiate"""
        try:
            return math.exp(self.mean)
        except OverflowError:
            return math.inf


@dataclass
class BandRow:
    band: str
    lower: int
    upper: float  # math.inf for the open top band
    types: int
    tokens: int
    baseline_ce: float | None
    comparison_ce: float | None
    relative_diff_pct: float | None  # positive means the comparison model is better

    @property
    def empty(self) -> bool:
        return self.tokens == 0


@dataclass
class BandReport:
    rows: list[BandRow]
    weighting: str  # "token" or "type"


@dataclass
class BenchRow:
    variant: str
    mean_seconds: float
    ratio: float  # relative to weight tying
    epoch_seconds: list[float] = field(default_factory=list)


@dataclass
class ParamRow:
    component: str  # "embedding", "encoder", "output" or "total"
    count: int


@dataclass
class RunSummary:
    seed: int
    best_val_ppl: float
    test_ppl: float


@dataclass
class AblationRow:
    variant: str
    output_params: int
    val_ppl: float  # median over seeds
    test_ppl: float
