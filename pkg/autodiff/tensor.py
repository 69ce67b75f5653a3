"""
Dense rank-2 tensors with tape-based reverse-mode differentiation
"""
from __future__ import annotations

import logging
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

from errors import (ConfigurationError, LabelIndexError, NonFiniteError,
                    ShapeError, UsageError)

logger = logging.getLogger(__name__)

DTYPE = np.float64

ACTIVATIONS = ("sigmoid", "tanh", "relu", "linear")

_tapes: list["Tape"] = []
_check_finite = True


class Tensor:
    """Immutable 2-D float64 array. Parameter values carry a back-reference."""

    __slots__ = ("values", "param")

    def __init__(self, values, param: "Parameter | None" = None):
        arr = np.array(values, dtype=DTYPE)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim != 2:
            raise ShapeError(f"only rank-2 tensors are supported, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ShapeError(f"tensor dimensions must be positive, got {arr.shape}")
        arr.setflags(write=False)
        self.values = arr
        self.param = param

    @classmethod
    def _wrap(cls, arr: np.ndarray) -> "Tensor":
        out = cls.__new__(cls)
        arr.setflags(write=False)
        out.values = arr
        out.param = None
        return out

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "Tensor":
        return cls(np.zeros((rows, cols)))

    @classmethod
    def eye(cls, n: int) -> "Tensor":
        return cls(np.eye(n))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def item(self) -> float:
        if self.values.size != 1:
            raise ShapeError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.values[0, 0])

    def numpy(self) -> np.ndarray:
        return self.values

    def detach(self) -> "Tensor":
        """Same values, cut loose from any tape or parameter"""
        return Tensor._wrap(self.values)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __mul__(self, other: "Tensor") -> "Tensor":
        return mul(self, other)

    @property
    def T(self) -> "Tensor":
        return transpose(self)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, values={self.values!r})"


class Parameter:
    """A named trainable tensor with a gradient accumulator of the same shape"""

    def __init__(self, name: str, values):
        self.name = name
        self.value = Tensor(values, param=self)
        self.grad = np.zeros(self.value.shape, dtype=DTYPE)

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape

    @property
    def size(self) -> int:
        return self.value.values.size

    def zero_grad(self):
        self.grad.fill(0.0)

    def assign(self, values):
        arr = np.asarray(values, dtype=DTYPE)
        if arr.size != self.size:
            raise ShapeError(
                f"cannot assign {arr.shape} values to parameter "
                f"'{self.name}' of shape {self.shape}"
            )
        self.value = Tensor(arr.reshape(self.shape), param=self)

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.shape})"


def zero_grads(params: Sequence[Parameter]):
    for p in params:
        p.zero_grad()


@dataclass
class Record:
    """One executed differentiable op"""
    op: str
    output: Tensor
    inputs: tuple[Tensor, ...]
    vjp: Callable[[np.ndarray], tuple]


@dataclass
class Tape:
    """
    Ordered log of differentiable ops executed while the tape is active.

    Usage:
        with Tape() as tape:
            loss = ...
        backward(tape, loss)
    """
    records: list[Record] = field(default_factory=list)
    _produced: set = field(default_factory=set)
    _used: bool = False

    def __enter__(self) -> "Tape":
        _tapes.append(self)
        return self

    def __exit__(self, *exc):
        _tapes.remove(self)

    def tracks(self, t: Tensor) -> bool:
        return t.param is not None or id(t) in self._produced

    def record(self, op: str, output: Tensor, inputs: tuple, vjp):
        self.records.append(Record(op, output, inputs, vjp))
        self._produced.add(id(output))

    @property
    def ops(self) -> list[str]:
        return [r.op for r in self.records]

    def __len__(self):
        return len(self.records)


def current_tape() -> Tape | None:
    return _tapes[-1] if _tapes else None


@contextmanager
def finite_checks(enabled: bool) -> Iterator[None]:
    """Toggle the per-op NaN/Inf check (on by default)"""
    global _check_finite
    previous, _check_finite = _check_finite, enabled
    try:
        yield
    finally:
        _check_finite = previous


def _emit(op: str, values: np.ndarray, inputs: tuple, vjp) -> Tensor:
    if _check_finite and not np.all(np.isfinite(values)):
        raise NonFiniteError(f"{op} produced a non-finite value")
    out = Tensor._wrap(values)
    tape = current_tape()
    if tape is not None and any(tape.tracks(t) for t in inputs):
        tape.record(op, out, inputs, vjp)
    return out


def backward(tape: Tape, loss: Tensor):
    """Accumulate dLoss/dParameter into every reachable Parameter.grad"""
    if tape._used:
        raise UsageError("backward was already run on this tape")
    if loss.shape != (1, 1):
        raise ShapeError(f"loss must be 1x1, got {loss.shape}")
    if not tape.tracks(loss):
        raise UsageError("loss was not produced under this tape")
    tape._used = True

    if loss.param is not None:
        loss.param.grad += 1.0
        return

    grads = {id(loss): np.ones((1, 1), dtype=DTYPE)}
    for rec in reversed(tape.records):
        g = grads.pop(id(rec.output), None)
        if g is None:
            continue
        for inp, gi in zip(rec.inputs, rec.vjp(g)):
            if gi is None or not tape.tracks(inp):
                continue
            if inp.param is not None:
                inp.param.grad += gi
            elif id(inp) in grads:
                grads[id(inp)] = grads[id(inp)] + gi
            else:
                grads[id(inp)] = gi


def _same_shape(op: str, a: Tensor, b: Tensor):
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} differ")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dimensions of {a.shape} and {b.shape} disagree")
    av, bv = a.values, b.values
    return _emit("matmul", av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g))


def add_row_bias(a: Tensor, bias: Tensor) -> Tensor:
    if bias.shape != (1, a.shape[1]):
        raise ShapeError(f"add_row_bias: bias {bias.shape} does not fit rows of {a.shape}")
    return _emit("add_row_bias", a.values + bias.values, (a, bias),
                 lambda g: (g, g.sum(axis=0, keepdims=True)))


def add(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("add", a, b)
    return _emit("add", a.values + b.values, (a, b), lambda g: (g, g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("mul", a, b)
    av, bv = a.values, b.values
    return _emit("mul", av * bv, (a, b), lambda g: (g * bv, g * av))


def scale(a: Tensor, c: float) -> Tensor:
    return _emit("scale", a.values * c, (a,), lambda g: (g * c,))


def transpose(a: Tensor) -> Tensor:
    return _emit("transpose", a.values.T.copy(), (a,), lambda g: (g.T,))


def sum_all(a: Tensor) -> Tensor:
    shape = a.shape
    return _emit("sum", np.array([[a.values.sum()]]), (a,),
                 lambda g: (np.full(shape, g[0, 0]),))


def slice_cols(a: Tensor, start: int, stop: int) -> Tensor:
    if not 0 <= start < stop <= a.shape[1]:
        raise ShapeError(f"slice_cols: [{start}:{stop}) outside {a.shape}")
    shape = a.shape

    def vjp(g):
        full = np.zeros(shape, dtype=DTYPE)
        full[:, start:stop] = g
        return (full,)

    return _emit("slice_cols", a.values[:, start:stop].copy(), (a,), vjp)


def concat_rows(parts: Sequence[Tensor]) -> Tensor:
    if not parts:
        raise ShapeError("concat_rows needs at least one tensor")
    cols = parts[0].shape[1]
    if any(p.shape[1] != cols for p in parts):
        raise ShapeError(f"concat_rows: column counts differ {[p.shape for p in parts]}")
    bounds = np.cumsum([0] + [p.shape[0] for p in parts])

    def vjp(g):
        return tuple(g[lo:hi] for lo, hi in zip(bounds[:-1], bounds[1:]))

    return _emit("concat_rows", np.concatenate([p.values for p in parts], axis=0),
                 tuple(parts), vjp)


def gather_rows(table: Tensor, ids) -> Tensor:
    """Row lookup; gradients scatter-add back into the table"""
    idx = np.asarray(ids, dtype=np.int64).reshape(-1)
    if idx.size == 0:
        raise ShapeError("gather_rows needs at least one id")
    if idx.min() < 0 or idx.max() >= table.shape[0]:
        bad = idx[(idx < 0) | (idx >= table.shape[0])][0]
        raise LabelIndexError(f"id {bad} outside table of {table.shape[0]} rows")
    shape = table.shape

    def vjp(g):
        full = np.zeros(shape, dtype=DTYPE)
        np.add.at(full, idx, g)
        return (full,)

    return _emit("gather_rows", table.values[idx], (table,), vjp)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def activation(a: Tensor, kind: str) -> Tensor:
    x = a.values
    if kind == "sigmoid":
        y = _sigmoid(x)
        return _emit("sigmoid", y, (a,), lambda g: (g * y * (1.0 - y),))
    if kind == "tanh":
        y = np.tanh(x)
        return _emit("tanh", y, (a,), lambda g: (g * (1.0 - y * y),))
    if kind == "relu":
        live = x > 0
        return _emit("relu", np.where(live, x, 0.0), (a,), lambda g: (g * live,))
    if kind == "linear":
        return a
    raise ConfigurationError(f"unknown activation '{kind}', expected one of {ACTIVATIONS}")


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def row_nll(logits: np.ndarray, targets) -> np.ndarray:
    """Per-row negative log-likelihood, no tape involvement"""
    idx = _check_targets(logits.shape, targets)
    shifted = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1))
    return lse - shifted[np.arange(len(idx)), idx]


def _check_targets(shape: tuple[int, int], targets) -> np.ndarray:
    idx = np.atleast_1d(np.asarray(targets, dtype=np.int64))
    if idx.shape != (shape[0],):
        raise ShapeError(f"{idx.size} targets for {shape[0]} logit rows")
    bad = (idx < 0) | (idx >= shape[1])
    if bad.any():
        raise LabelIndexError(f"target {idx[bad][0]} outside vocabulary of {shape[1]}")
    return idx


def softmax_cross_entropy(logits: Tensor, targets) -> Tensor:
    """Mean NLL over the rows of logits[n x V]; the row max is subtracted first"""
    idx = _check_targets(logits.shape, targets)
    n = len(idx)
    probs = softmax(logits.values)
    nll = row_nll(logits.values, idx)

    def vjp(g):
        d = probs.copy()
        d[np.arange(n), idx] -= 1.0
        return (d * (g[0, 0] / n),)

    return _emit("softmax_cross_entropy", np.array([[nll.mean()]]), (logits,), vjp)
