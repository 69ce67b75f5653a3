import math

import numpy as np
import pytest

from data.corpus import EOS, UNK, Vocab, build_vocab
from data.frequency import assign_bands
from data.synthetic import generate_sentences
from errors import DataError
from evaluation.bands import band_compare
from evaluation.benchmark import EpochBenchmark, epoch_benchmark
from evaluation.evaluator import Evaluator, per_token_losses, perplexity
from evaluation.params import closed_form_output_params, param_report
from layers.language_model import build_language_model
from layers.output_layers import OUTPUT_KINDS, param_count
from models.config import EncoderConfig, OutputConfig, TrainConfig
from models.reports import PerTokenLoss


def _model(V, d=4, kind="weight_tying", seed=0, **output):
    return build_language_model(V, EncoderConfig(1, d, d, 0.0), OutputConfig(kind=kind, **output),
                                np.random.default_rng(seed))


# perplexity

def test_uniform_model_perplexity_is_vocab_size():
    model = _model(9)
    model.embedding.E.assign(np.zeros((9, 4)))
    ids = np.random.default_rng(0).integers(0, 9, size=40)
    assert perplexity(model, ids, bptt_len=6) == pytest.approx(9.0, rel=1e-12)


def test_perplexity_is_exp_of_mean_per_token_loss():
    model = _model(7, kind="drill", depth=2)
    ids = np.random.default_rng(1).integers(0, 7, size=50)
    losses = per_token_losses(model, ids, bptt_len=8)
    assert len(losses) == 49
    assert perplexity(model, ids, bptt_len=8) == pytest.approx(math.exp(losses.nll.mean()), abs=1e-10)


def test_each_strip_loses_its_first_token():
    model = _model(5)
    ids = np.random.default_rng(2).integers(0, 5, size=20)
    losses = Evaluator(bptt_len=4, batch_size=3).per_token_losses(model, ids)
    assert len(losses) == 15
    assert list(losses.positions) == sorted(losses.positions)
    np.testing.assert_array_equal(losses.target_ids, ids[losses.positions])


def test_position_order_does_not_depend_on_bptt_len():
    model = _model(6, kind="bilinear")
    ids = np.random.default_rng(3).integers(0, 6, size=33)
    short = per_token_losses(model, ids, bptt_len=3)
    long = per_token_losses(model, ids, bptt_len=32)
    np.testing.assert_array_equal(short.positions, np.arange(1, 33))
    np.testing.assert_allclose(short.nll, long.nll, rtol=0, atol=1e-12)


def test_eval_batch_size_barely_moves_perplexity():
    text = "\n".join(generate_sentences(5000, vocab_size=150, seed=3))
    vocab = build_vocab(text)
    ids = vocab.encode_text(text)
    model = _model(len(vocab), kind="drill", depth=2, seed=4)
    one = Evaluator(bptt_len=35, batch_size=1).perplexity(model, ids)
    eight = Evaluator(bptt_len=35, batch_size=8).perplexity(model, ids)
    assert eight == pytest.approx(one, rel=1e-3)


def test_empty_split():
    with pytest.raises(DataError, match="empty"):
        perplexity(_model(4), np.array([], dtype=np.int64))


# frequency bands

def _bands():
    vocab = Vocab(["c", "b", "a", EOS, UNK], [50000, 50, 5, 1, 0])
    return vocab, assign_bands(vocab)


def _losses(ids, nll):
    ids = np.asarray(ids)
    return PerTokenLoss(np.arange(1, len(ids) + 1), ids, np.asarray(nll, dtype=float))


def _row(report, label):
    return next(row for row in report.rows if row.band == label)


def test_identical_models_differ_by_zero():
    _, bands = _bands()
    losses = _losses([2, 1, 0, 3, 2], [1.0, 2.0, 0.5, 3.0, 1.5])
    report = band_compare(losses, losses, bands)
    for row in report.rows:
        assert row.empty or row.relative_diff_pct == 0.0


def test_halved_loss_is_fifty_percent_better():
    _, bands = _bands()
    ids = [2, 1, 0, 2]
    report = band_compare(_losses(ids, [2.0] * 4), _losses(ids, [1.0] * 4), bands)
    for label in ("[1,10)", "[10,100)", "[10k,inf)"):
        assert _row(report, label).relative_diff_pct == pytest.approx(50.0)


def test_band_gap_is_antisymmetric(rng):
    _, bands = _bands()
    ids = rng.integers(0, 4, size=30)
    first, second = _losses(ids, rng.uniform(0.1, 5, 30)), _losses(ids, rng.uniform(0.1, 5, 30))
    forward, backward = band_compare(first, second, bands), band_compare(second, first, bands)
    for a, b in zip(forward.rows, backward.rows):
        if a.empty:
            assert b.empty
            continue
        assert a.baseline_ce - a.comparison_ce == pytest.approx(-(b.baseline_ce - b.comparison_ce))


def test_empty_bands_and_unseen_targets():
    _, bands = _bands()
    ids = [2, 4, 2]
    report = band_compare(_losses(ids, [1.0, 9.0, 1.0]), _losses(ids, [1.0, 9.0, 1.0]), bands)
    assert _row(report, "[1,10)").tokens == 2
    assert _row(report, "[1,10)").types == 1
    for label in ("[10,100)", "[100,1k)", "[1k,10k)", "[10k,inf)"):
        row = _row(report, label)
        assert row.empty
        assert row.baseline_ce is None and row.relative_diff_pct is None
    assert sum(row.tokens for row in report.rows) == 2


def test_type_weighting_averages_per_word():
    _, bands = _bands()
    ids = [2, 2, 2, 3]
    baseline = _losses(ids, [1.0, 1.0, 1.0, 3.0])
    token = band_compare(baseline, baseline, bands, weighting="token")
    by_type = band_compare(baseline, baseline, bands, weighting="type")
    assert _row(token, "[1,10)").baseline_ce == pytest.approx(1.5)
    assert _row(by_type, "[1,10)").baseline_ce == pytest.approx(2.0)
    assert by_type.weighting == "type"


def test_misaligned_losses_are_rejected():
    _, bands = _bands()
    with pytest.raises(DataError):
        band_compare(_losses([2, 1], [1.0, 1.0]), _losses([2, 1, 0], [1.0, 1.0, 1.0]), bands)
    with pytest.raises(DataError, match="record 1"):
        band_compare(_losses([2, 1], [1.0, 1.0]), _losses([2, 0], [1.0, 1.0]), bands)


def test_target_outside_the_banded_vocabulary():
    _, bands = _bands()
    with pytest.raises(DataError, match="outside"):
        band_compare(_losses([7], [1.0]), _losses([7], [1.0]), bands)


# parameter accounting

def test_tied_output_carries_only_the_bias():
    rows = {row.component: row.count for row in param_report(_model(12))}
    assert rows["output"] == 12
    assert rows["embedding"] == 12 * 4
    assert rows["total"] == rows["embedding"] + rows["encoder"] + rows["output"]


def test_closed_form_at_full_scale():
    assert param_count("drill", 10000, 400, 400, k=4) == 651_600
    assert param_count("weight_tying", 10000, 400, 400) == 10_000
    assert param_count("full_softmax", 10000, 400, 400) == 4_010_000
    assert param_count("dual_nonlinear", 10000, 400, 400, d_j=400) == 330_800


@pytest.mark.parametrize("kind", OUTPUT_KINDS)
@pytest.mark.parametrize("depth", [1, 3])
def test_reported_output_matches_closed_form(kind, depth):
    model = _model(11, d=5, kind=kind, depth=depth, d_joint=3)
    rows = {row.component: row.count for row in param_report(model)}
    assert rows["output"] == closed_form_output_params(model)


# epoch timing

def test_benchmark_ratios_are_relative_to_weight_tying():
    bench = EpochBenchmark(EncoderConfig(1, 4, 4, 0.0),
                           TrainConfig(epochs=1, bptt_len=5, batch_size=2, lr=0.5), repetitions=3)
    ids = np.random.default_rng(0).integers(0, 8, size=60)
    variants = [("drill-k2", OutputConfig(kind="drill", depth=2)),
                ("weight_tying", OutputConfig(kind="weight_tying"))]
    rows = bench.run(variants, ids, vocab_size=8)
    assert [row.variant for row in rows] == ["drill-k2", "weight_tying"]
    assert rows[1].ratio == 1.0
    assert all(len(row.epoch_seconds) == 3 for row in rows)
    assert rows[0].ratio == pytest.approx(rows[0].mean_seconds / rows[1].mean_seconds)


def test_benchmark_without_weight_tying_uses_the_first_variant():
    ids = np.random.default_rng(1).integers(0, 6, size=40)
    rows = epoch_benchmark([("bilinear", OutputConfig(kind="bilinear")), ("full", OutputConfig(kind="full_softmax"))],
                           EncoderConfig(1, 3, 3, 0.0), TrainConfig(bptt_len=4, batch_size=2, lr=0.5),
                           ids, vocab_size=6)
    assert rows[0].ratio == 1.0
    assert all(row.mean_seconds > 0 for row in rows)


def test_perfect_predictor_perplexity_is_one():
    model = _model(3, kind="full_softmax")
    model.output.W.assign(np.zeros(model.output.W.shape))
    model.output.bias.assign([[0.0, 60.0, 0.0]])
    assert perplexity(model, np.ones(30, dtype=np.int64), bptt_len=7) == pytest.approx(1.0, abs=1e-12)


def test_hopeless_predictor_perplexity_is_inf():
    model = _model(3, kind="full_softmax")
    model.output.W.assign(np.zeros(model.output.W.shape))
    model.output.bias.assign([[0.0, 2000.0, 0.0]])
    losses = per_token_losses(model, np.zeros(30, dtype=np.int64), bptt_len=7)
    assert losses.mean == pytest.approx(2000.0)
    assert losses.perplexity == math.inf
    assert perplexity(model, np.zeros(30, dtype=np.int64), bptt_len=7) == math.inf


def test_untrained_model_is_near_uniform():
    model = _model(10, d=8, kind="drill", depth=2, seed=5)
    ids = np.random.default_rng(6).integers(0, 10, size=200)
    assert perplexity(model, ids) == pytest.approx(10.0, rel=0.2)
