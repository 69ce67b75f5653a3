"""
Evaluator - perplexity and per-token losses with full state threading
"""
import logging

import numpy as np

from autodiff.tensor import row_nll
from data.corpus import batchify, bptt_windows
from errors import DataError
from layers.language_model import LanguageModel
from models.reports import PerTokenLoss

logger = logging.getLogger(__name__)


class Evaluator:
    """
    Scores a token stream in eval mode. The stream is cut into batch_size
    contiguous strips; the first token of each strip is never scored.
    Records come back sorted by position in the original stream.
    """

    def __init__(self, bptt_len: int = 35, batch_size: int = 1):
        self.bptt_len = bptt_len
        self.batch_size = batch_size

    def per_token_losses(self, model: LanguageModel, ids) -> PerTokenLoss:
        ids = np.asarray(ids, dtype=np.int64).reshape(-1)
        if ids.size == 0:
            raise DataError("evaluation split is empty")
        batched = batchify(ids, self.batch_size)
        strip_starts = np.arange(batched.batch_size)[:, None] * batched.strip_len
        state = model.initial_state(batched.batch_size)

        positions, target_ids, losses = [], [], []
        column = 0
        for inputs, targets in bptt_windows(batched, self.bptt_len):
            steps = inputs.shape[1]
            logits, state = model.forward(inputs, state, "eval", None)
            flat_targets = targets.T.reshape(-1)
            losses.append(row_nll(logits.values, flat_targets))
            target_ids.append(flat_targets)
            pos = strip_starts + column + np.arange(steps)[None, :] + 1
            positions.append(pos.T.reshape(-1))
            column += steps

        positions = np.concatenate(positions)
        order = np.argsort(positions, kind="stable")
        result = PerTokenLoss(
            positions=positions[order],
            target_ids=np.concatenate(target_ids)[order],
            nll=np.concatenate(losses)[order],
        )
        logger.debug("scored %d of %d tokens", len(result), ids.size)
        return result

    def perplexity(self, model: LanguageModel, ids) -> float:
        return self.per_token_losses(model, ids).perplexity


def per_token_losses(model: LanguageModel, ids, bptt_len: int = 35,
                     batch_size: int = 1) -> PerTokenLoss:
    return Evaluator(bptt_len, batch_size).per_token_losses(model, ids)


def perplexity(model: LanguageModel, ids, bptt_len: int = 35, batch_size: int = 1) -> float:
    """exp(mean NLL per scored token)"""
    return Evaluator(bptt_len, batch_size).perplexity(model, ids)
