import math

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from autodiff.gradcheck import finite_difference_check
from autodiff.tensor import (Parameter, Tape, Tensor, activation, add, add_row_bias,
                             backward, concat_rows, finite_checks, gather_rows, matmul,
                             mul, scale, slice_cols, softmax, softmax_cross_entropy,
                             sum_all, transpose, zero_grads)
from errors import (ConfigurationError, LabelIndexError, NonFiniteError,
                    OraclePreconditionError, ShapeError, UsageError)

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def weighted_sum(out: Tensor, weights: np.ndarray) -> Tensor:
    """Reduces any output to a scalar with fixed, non-uniform weights"""
    return sum_all(mul(out, Tensor(weights)))


# forward examples

def test_matmul_examples():
    a = Tensor([[1, 2], [3, 4]])
    npt.assert_array_equal(matmul(a, Tensor.eye(2)).values, [[1, 2], [3, 4]])
    npt.assert_array_equal(matmul(a, Tensor.zeros(2, 2)).values, [[0, 0], [0, 0]])
    npt.assert_array_equal((a @ Tensor([[5, 6], [7, 8]])).values, [[19, 22], [43, 50]])


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(ShapeError, match=r"\(2, 3\).*\(2, 2\)"):
        matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 2))))


def test_add_row_bias_examples():
    npt.assert_array_equal(add_row_bias(Tensor([[1, 2], [3, 4]]), Tensor([0, 0])).values,
                           [[1, 2], [3, 4]])
    npt.assert_array_equal(add_row_bias(Tensor([[0, 0]]), Tensor([5, -5])).values, [[5, -5]])
    npt.assert_array_equal(add_row_bias(Tensor([[1, 1], [2, 2]]), Tensor([10, 20])).values,
                           [[11, 21], [12, 22]])
    with pytest.raises(ShapeError):
        add_row_bias(Tensor([[1, 1]]), Tensor([1, 2, 3]))


def test_activation_examples():
    assert activation(Tensor(0.0), "sigmoid").item() == 0.5
    npt.assert_array_equal(activation(Tensor([-1.0, 2.0]), "relu").values, [[0.0, 2.0]])
    assert activation(Tensor(0.5), "tanh").item() == pytest.approx(0.46211715726, abs=1e-11)
    x = Tensor([[0.3, -0.7]])
    assert activation(x, "linear") is x
    with pytest.raises(ConfigurationError):
        activation(x, "softplus")


def test_softmax_cross_entropy_examples():
    assert softmax_cross_entropy(Tensor([0.0, 0.0, 0.0]), 0).item() == pytest.approx(math.log(3), abs=1e-12)
    stable = softmax_cross_entropy(Tensor([1000.0, 0.0]), 0).item()
    assert math.isfinite(stable) and stable == pytest.approx(0.0, abs=1e-12)
    assert softmax_cross_entropy(Tensor([1.0, 2.0, 3.0]), 2).item() == pytest.approx(0.40760596444, abs=1e-10)


def test_softmax_cross_entropy_rejects_out_of_range_target():
    with pytest.raises(LabelIndexError):
        softmax_cross_entropy(Tensor([1.0, 2.0]), 2)
    with pytest.raises(IndexError):
        softmax_cross_entropy(Tensor([1.0, 2.0]), -1)


def test_tensor_rejects_higher_rank():
    with pytest.raises(ShapeError):
        Tensor(np.zeros((2, 2, 2)))


# backward

def test_backward_sum_gives_ones():
    p = Parameter("p", np.arange(4.0).reshape(2, 2))
    with Tape() as tape:
        loss = sum_all(p.value)
    backward(tape, loss)
    npt.assert_array_equal(p.grad, np.ones((2, 2)))


def test_backward_dead_branch_gives_zeros():
    p = Parameter("p", np.arange(4.0).reshape(2, 2))
    with Tape() as tape:
        loss = sum_all(scale(p.value, 0.0))
    backward(tape, loss)
    npt.assert_array_equal(p.grad, np.zeros((2, 2)))


def test_backward_cross_entropy_gradient():
    p = Parameter("logits", [[1.0, 2.0, 3.0]])
    with Tape() as tape:
        loss = softmax_cross_entropy(p.value, 2)
    backward(tape, loss)
    e = np.exp([1.0, 2.0, 3.0])
    expected = e / e.sum() - np.eye(3)[2]
    npt.assert_allclose(p.grad, [expected], rtol=0, atol=1e-12)
    npt.assert_allclose(p.grad, [[0.0900306, 0.2447285, -0.3347590]], atol=1e-7)


def test_unreachable_parameter_untouched():
    p = Parameter("p", [[1.0, 2.0]])
    q = Parameter("q", [[3.0, 4.0]])
    q.grad[:] = 7.0
    with Tape() as tape:
        loss = sum_all(p.value)
    backward(tape, loss)
    npt.assert_array_equal(q.grad, [[7.0, 7.0]])


def test_tape_is_single_use():
    p = Parameter("p", [[1.0]])
    with Tape() as tape:
        loss = sum_all(mul(p.value, p.value))
    backward(tape, loss)
    with pytest.raises(UsageError):
        backward(tape, loss)


def test_backward_rejects_foreign_loss():
    p = Parameter("p", [[1.0, 2.0]])
    loss = sum_all(p.value)
    with Tape() as tape:
        sum_all(p.value)
    with pytest.raises(UsageError):
        backward(tape, loss)


def test_tape_records_in_execution_order():
    w = Parameter("w", np.ones((2, 3)))
    b = Parameter("b", np.zeros((1, 3)))
    with Tape() as tape:
        loss = sum_all(activation(add_row_bias(matmul(Tensor(np.ones((1, 2))), w.value), b.value), "sigmoid"))
    assert tape.ops == ["matmul", "add_row_bias", "sigmoid", "sum"]
    backward(tape, loss)
    assert b.grad[0, 0] == pytest.approx(0.5 * (1 + math.tanh(1.0)) * (1 - 0.5 * (1 + math.tanh(1.0))))


def test_ops_outside_a_tape_are_not_recorded():
    p = Parameter("p", [[1.0, 2.0]])
    with Tape() as tape:
        pass
    sum_all(p.value)
    assert len(tape) == 0


def test_gradients_accumulate_and_zero():
    p = Parameter("p", [[1.0, -2.0]])
    for _ in range(2):
        with Tape() as tape:
            loss = sum_all(scale(p.value, 3.0))
        backward(tape, loss)
    npt.assert_array_equal(p.grad, [[6.0, 6.0]])
    zero_grads([p])
    assert np.all(p.grad == 0.0)


def test_backward_is_linear_in_the_loss(rng):
    p = Parameter("p", rng.normal(size=(3, 4)))
    w1, w2 = rng.normal(size=(3, 4)), rng.normal(size=(3, 4))

    separate = np.zeros((3, 4))
    for w in (w1, w2):
        zero_grads([p])
        with Tape() as tape:
            loss = weighted_sum(activation(p.value, "tanh"), w)
        backward(tape, loss)
        separate += p.grad

    zero_grads([p])
    with Tape() as tape:
        h = activation(p.value, "tanh")
        loss = add(weighted_sum(h, w1), weighted_sum(h, w2))
    backward(tape, loss)
    npt.assert_allclose(p.grad, separate, rtol=1e-12, atol=1e-14)


def test_non_finite_values_raise():
    with np.errstate(over="ignore"), finite_checks(True):
        with pytest.raises(NonFiniteError, match="scale"):
            scale(Tensor([[1e308]]), 10.0)


def test_finite_checks_can_be_disabled():
    with np.errstate(over="ignore"), finite_checks(False):
        out = scale(Tensor([[1e308]]), 10.0)
    assert math.isinf(out.item())


# properties

@given(st.lists(st.floats(min_value=-50, max_value=50), min_size=1, max_size=30))
def test_softmax_rows_sum_to_one(row):
    probs = softmax(np.array([row]))
    assert abs(probs.sum() - 1.0) <= 1e-12
    assert np.all((probs >= 0.0) & (probs <= 1.0))


@given(seeds)
@settings(max_examples=30, deadline=None)
def test_matmul_is_associative(seed):
    g = np.random.default_rng(seed)
    m, k, n, q = g.integers(1, 7, size=4)
    a, b, c = (Tensor(g.uniform(-2, 2, size=s)) for s in ((m, k), (k, n), (n, q)))
    left = ((a @ b) @ c).values
    right = (a @ (b @ c)).values
    scale_ = max(1.0, np.abs(left).max())
    assert np.abs(left - right).max() <= 1e-9 * scale_


# gradient oracle

def test_gradcheck_quadratic():
    p = Parameter("p", np.random.default_rng(0).uniform(0.5, 1.5, size=(3, 2)))
    err = finite_difference_check(lambda ps: scale(sum_all(mul(ps[0].value, ps[0].value)), 0.5), [p])
    assert err < 1e-7


def test_gradcheck_restores_parameters():
    p = Parameter("p", [[0.25, -0.75]])
    before = p.value.values.copy()
    finite_difference_check(lambda ps: sum_all(activation(ps[0].value, "tanh")), [p])
    npt.assert_array_equal(p.value.values, before)


def test_gradcheck_detects_nondeterminism():
    p = Parameter("p", [[1.0]])
    noise = np.random.default_rng(0)
    with pytest.raises(OraclePreconditionError):
        finite_difference_check(lambda ps: scale(ps[0].value, float(noise.random())), [p])


def test_gradcheck_rejects_bad_step():
    p = Parameter("p", [[1.0]])
    with pytest.raises(ConfigurationError):
        finite_difference_check(lambda ps: sum_all(ps[0].value), [p], h=0.0)


def _away_from_zero(x: np.ndarray) -> np.ndarray:
    return np.where(x >= 0, x + 0.01, x - 0.01)


@given(seeds)
@settings(max_examples=20, deadline=None)
def test_gradcheck_elementwise_and_linear_ops(seed):
    g = np.random.default_rng(seed)
    m, k, n = g.integers(1, 5, size=3)
    a = Parameter("a", g.uniform(-1, 1, (m, k)))
    b = Parameter("b", g.uniform(-1, 1, (k, n)))
    bias = Parameter("bias", g.uniform(-1, 1, (1, n)))
    other = Parameter("other", g.uniform(-1, 1, (m, n)))
    w = g.normal(size=(m, n))

    def f(ps):
        a_, b_, bias_, other_ = (p.value for p in ps)
        out = add_row_bias(matmul(a_, b_), bias_)
        out = add(mul(out, other_), transpose(transpose(other_)))
        return weighted_sum(out, w)

    assert finite_difference_check(f, [a, b, bias, other], abs_floor=1e-4) < 1e-5


@pytest.mark.parametrize("kind", ["sigmoid", "tanh", "relu", "linear"])
@given(seed=seeds)
@settings(max_examples=20, deadline=None)
def test_gradcheck_activations(kind, seed):
    g = np.random.default_rng(seed)
    x = Parameter("x", _away_from_zero(g.uniform(-2, 2, (3, 4))))
    w = g.normal(size=(3, 4))
    err = finite_difference_check(lambda ps: weighted_sum(activation(ps[0].value, kind), w), [x],
                                  abs_floor=1e-4)
    assert err < 1e-5


@given(seeds)
@settings(max_examples=20, deadline=None)
def test_gradcheck_structural_ops(seed):
    g = np.random.default_rng(seed)
    table = Parameter("table", g.uniform(-1, 1, (5, 4)))
    ids = g.integers(0, 5, size=6)  # repeats exercise scatter-add
    w = g.normal(size=(8, 2))

    def f(ps):
        stacked = concat_rows([gather_rows(ps[0].value, ids), gather_rows(ps[0].value, ids[:2])])
        return weighted_sum(slice_cols(stacked, 1, 3), w)

    assert finite_difference_check(f, [table], abs_floor=1e-4) < 1e-5


@given(seeds)
@settings(max_examples=20, deadline=None)
def test_gradcheck_cross_entropy(seed):
    g = np.random.default_rng(seed)
    logits = Parameter("logits", g.normal(size=(4, 6)))
    targets = g.integers(0, 6, size=4)
    err = finite_difference_check(lambda ps: softmax_cross_entropy(ps[0].value, targets), [logits],
                                  abs_floor=1e-4)
    assert err < 1e-5


def test_gather_rows_rejects_bad_id():
    with pytest.raises(LabelIndexError):
        gather_rows(Tensor(np.eye(3)), [0, 3])
