"""
EpochBenchmark - wall-clock seconds per training epoch for output-layer variants
"""
import logging
import time
from typing import Sequence

import numpy as np

from layers.language_model import build_language_model
from models.config import EncoderConfig, OutputConfig, TrainConfig
from models.reports import BenchRow
from training.optimizers import build_optimizer
from training.trainer import Trainer

logger = logging.getLogger(__name__)


class EpochBenchmark:
    """
    Times full training epochs with identical encoder, data and seed for
    every variant. One warm-up epoch per variant is excluded; token
    encoding happens before timing starts.
    """

    def __init__(self, encoder_config: EncoderConfig, train_config: TrainConfig,
                 repetitions: int = 3):
        self.encoder_config = encoder_config
        self.train_config = train_config
        self.repetitions = repetitions

    def time_variant(self, output_config: OutputConfig, train_ids: np.ndarray,
                     vocab_size: int) -> list[float]:
        cfg = self.train_config
        model = build_language_model(vocab_size, self.encoder_config, output_config,
                                     np.random.default_rng(cfg.seed))
        trainer = Trainer(cfg)
        optimizer = build_optimizer(cfg.optimizer, model.parameters(), cfg.lr)
        rng = np.random.default_rng((cfg.seed, 1))

        trainer.run_epoch(model, train_ids, optimizer, rng, epoch=0)
        seconds = []
        for rep in range(1, self.repetitions + 1):
            start = time.perf_counter()
            trainer.run_epoch(model, train_ids, optimizer, rng, epoch=rep)
            seconds.append(time.perf_counter() - start)
        return seconds

    def run(self, variants: Sequence[tuple[str, OutputConfig]], train_ids: np.ndarray,
            vocab_size: int) -> list[BenchRow]:
        """Ratios are relative to the weight_tying variant, else the first one"""
        rows = []
        for label, output_config in variants:
            seconds = self.time_variant(output_config, train_ids, vocab_size)
            mean = float(np.mean(seconds))
            logger.info("%s: %.3fs per epoch over %d repetitions", label, mean, len(seconds))
            rows.append(BenchRow(label, mean, 1.0, seconds))

        if rows:
            reference = next((row for row, (_, oc) in zip(rows, variants)
                              if oc.kind == "weight_tying"), rows[0])
            for row in rows:
                row.ratio = row.mean_seconds / reference.mean_seconds
        return rows


def epoch_benchmark(variants: Sequence[tuple[str, OutputConfig]], encoder_config: EncoderConfig,
                    train_config: TrainConfig, train_ids: np.ndarray, vocab_size: int,
                    repetitions: int = 3) -> list[BenchRow]:
    return EpochBenchmark(encoder_config, train_config, repetitions).run(variants, train_ids, vocab_size)
