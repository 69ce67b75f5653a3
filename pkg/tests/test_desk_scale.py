import math

import numpy as np
import pytest

from data.corpus import build_vocab
from data.frequency import assign_bands
from data.synthetic import generate_sentences
from evaluation.bands import band_compare
from evaluation.benchmark import EpochBenchmark
from evaluation.evaluator import Evaluator
from layers.language_model import build_language_model
from models.config import EncoderConfig, OutputConfig, TrainConfig
from training.trainer import Trainer

pytestmark = pytest.mark.slow

ENCODER = EncoderConfig(1, 32, 32, 0.0)
TRAINING = TrainConfig(optimizer="adam", lr=0.005, epochs=4, bptt_len=20, batch_size=16,
                       clip_norm=1.0, seed=0)
TIED = OutputConfig(kind="weight_tying")
DRILL = OutputConfig(kind="drill", depth=2, dropout_mode="none", dropout_rate=0.0)


@pytest.fixture(scope="module")
def corpus():
    sentences = generate_sentences(12_000, vocab_size=300, n_classes=12, seed=7)
    cut = int(len(sentences) * 0.8)
    train_text, valid_text = "\n".join(sentences[:cut]), "\n".join(sentences[cut:])
    vocab = build_vocab(train_text)
    return vocab, vocab.encode_text(train_text), vocab.encode_text(valid_text)


@pytest.fixture(scope="module")
def trained(corpus):
    vocab, train, valid = corpus
    evaluator = Evaluator(TRAINING.bptt_len, 1)
    results = {}
    for name, output in (("tied", TIED), ("drill", DRILL)):
        model = build_language_model(len(vocab), ENCODER, output, np.random.default_rng(0))
        Trainer(TRAINING).train(model, train, valid)
        results[name] = evaluator.per_token_losses(model, valid)
    return results


def test_both_models_learn_the_corpus(corpus, trained):
    vocab, _, _ = corpus
    for losses in trained.values():
        assert math.isfinite(losses.perplexity)
        assert losses.perplexity < 0.6 * len(vocab)


def test_drill_keeps_up_with_weight_tying(trained):
    assert trained["drill"].perplexity <= 1.25 * trained["tied"].perplexity


def test_rare_bands_are_harder_for_both_models(corpus, trained):
    vocab, _, _ = corpus
    bands = assign_bands(vocab, (10, 100))
    report = band_compare(trained["tied"], trained["drill"], bands)
    filled = [row for row in report.rows if not row.empty]
    assert len(filled) >= 2
    rarest, commonest = filled[0], filled[-1]
    assert rarest.baseline_ce > commonest.baseline_ce
    assert rarest.comparison_ce > commonest.comparison_ce
    for row in filled:
        assert math.isfinite(row.relative_diff_pct)


def test_drill_epoch_cost_stays_near_weight_tying(corpus):
    vocab, train, _ = corpus
    bench = EpochBenchmark(ENCODER, TRAINING, repetitions=2)
    rows = bench.run([("weight_tying", TIED), ("drill-k2", DRILL)], train[:3000], len(vocab))
    assert rows[0].ratio == 1.0
    assert rows[1].ratio < 3.0
