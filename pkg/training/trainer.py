"""
Trainer - NLL training over BPTT windows with clipping and plateau LR decay
"""
import logging
import math
import time
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import numpy as np

from autodiff.tensor import Parameter, Tape, Tensor, backward, finite_checks, zero_grads
from data.corpus import batchify, bptt_windows
from errors import DivergenceError, NonFiniteError
from evaluation.evaluator import Evaluator
from layers.dropout import Mode
from layers.encoder import State
from layers.language_model import LanguageModel
from models.config import RunConfig, TrainConfig
from models.reports import EpochRecord, TrainingLog
from training.checkpoint import save_checkpoint
from training.optimizers import build_optimizer

logger = logging.getLogger(__name__)


def window_loss(model: LanguageModel, inputs: np.ndarray, targets: np.ndarray,
                mode: Mode = "train", rng: np.random.Generator | None = None,
                state: State | None = None) -> tuple[Tensor, State]:
    """
    Mean NLL per token over a [B x T] window. The label side (and its
    variational mask) is computed once and shared by every step.
    """
    return model.window_loss(inputs, targets, state, mode, rng)


def clip_gradients(params: Sequence[Parameter], clip_norm: float) -> float:
    """Rescales all grads so their global L2 norm is at most clip_norm"""
    total = math.sqrt(sum(float(np.sum(p.grad * p.grad)) for p in params))
    if total <= clip_norm:
        return 1.0
    factor = clip_norm / total
    for p in params:
        p.grad *= factor
    return factor


class PlateauDecay:
    """Multiplies the LR by factor after `patience` epochs without improvement"""

    def __init__(self, factor: float, patience: int):
        self.factor = factor
        self.patience = patience
        self.best = math.inf
        self.stale_epochs = 0

    def step(self, val_ppl: float, lr: float) -> float:
        if val_ppl < self.best:
            self.best = val_ppl
            self.stale_epochs = 0
            return lr
        self.stale_epochs += 1
        if self.stale_epochs >= self.patience:
            self.stale_epochs = 0
            logger.info("validation plateau: lr %.4g -> %.4g", lr, lr * self.factor)
            return lr * self.factor
        return lr


class Trainer:
    """Owns the optimizer and the dropout generator for one training run"""

    def __init__(self, config: TrainConfig):
        self.config = config
        self.evaluator = Evaluator(bptt_len=config.bptt_len, batch_size=config.eval_batch_size)

    def run_epoch(self, model: LanguageModel, train_ids: np.ndarray, optimizer,
                  rng: np.random.Generator, epoch: int = 1) -> float:
        """One pass over the training stream; returns mean NLL per token"""
        cfg = self.config
        batched = batchify(train_ids, cfg.batch_size)
        params = model.parameters()
        state = model.initial_state(cfg.batch_size)
        total_nll, total_tokens = 0.0, 0

        with finite_checks(cfg.check_finite):
            for index, (inputs, targets) in enumerate(bptt_windows(batched, cfg.bptt_len)):
                zero_grads(params)
                try:
                    with Tape() as tape:
                        loss, state = window_loss(model, inputs, targets, "train", rng, state)
                    value = loss.item()
                    if not math.isfinite(value):
                        raise DivergenceError(epoch, index, value)
                    backward(tape, loss)
                except NonFiniteError as exc:
                    raise DivergenceError(epoch, index, math.nan) from exc
                clip_gradients(params, cfg.clip_norm)
                optimizer.step()
                total_nll += value * targets.size
                total_tokens += targets.size
                logger.debug("epoch %d window %d loss %.4f", epoch, index, value)
        return total_nll / total_tokens

    def train(self, model: LanguageModel, train_ids: np.ndarray, valid_ids: np.ndarray, *,
              checkpoint_path: str | Path | None = None, run_config: RunConfig | None = None,
              vocab_hash: str = "") -> TrainingLog:
        cfg = self.config
        rng = np.random.default_rng((cfg.seed, 1))
        optimizer = build_optimizer(cfg.optimizer, model.parameters(), cfg.lr)
        schedule = PlateauDecay(cfg.lr_decay_factor, cfg.patience)
        run_config = run_config or RunConfig(encoder=model.encoder_config,
                                             output=model.output_config, training=cfg)
        run_config = replace(run_config, training=cfg)
        log = TrainingLog()

        # epoch boundaries are chained; time spent logging counts toward the next epoch
        run_start = mark = time.perf_counter()
        for epoch in range(1, cfg.epochs + 1):
            lr_used = optimizer.lr
            train_loss = self.run_epoch(model, train_ids, optimizer, rng, epoch)
            val_ppl = self.evaluator.perplexity(model, valid_ids)

            if val_ppl < log.best_val_ppl:
                log.best_val_ppl, log.best_epoch = val_ppl, epoch
                if checkpoint_path is not None:
                    save_checkpoint(model, checkpoint_path, config=run_config,
                                    vocab_hash=vocab_hash, optimizer=optimizer,
                                    epoch=epoch, best_val_ppl=val_ppl)
            optimizer.lr = schedule.step(val_ppl, optimizer.lr)

            now = time.perf_counter()
            seconds, mark = now - mark, now
            log.records.append(EpochRecord(epoch, train_loss, val_ppl, lr_used, seconds))
            logger.info("epoch %d | train loss %.4f | val ppl %.2f | lr %.4g | %.1fs",
                        epoch, train_loss, val_ppl, lr_used, seconds)
        log.total_seconds = mark - run_start
        return log
