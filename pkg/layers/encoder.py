"""
Embedding table and a plain stacked LSTM context network
"""
from typing import Sequence

import numpy as np

from autodiff.tensor import (Parameter, Tensor, activation, add, add_row_bias,
                             gather_rows, matmul, mul, slice_cols)
from errors import ConfigurationError, ShapeError
from layers.dropout import DropoutSpec, Mode, apply_dropout
from layers.output_layers import INIT_BOUND

State = list[tuple[Tensor, Tensor]]


class EmbeddingTable:
    """E [|V| x d], shared by reference with output layers that read it"""

    def __init__(self, vocab_size: int, d: int, rng: np.random.Generator):
        self.E = Parameter("embedding.E", rng.uniform(-INIT_BOUND, INIT_BOUND, (vocab_size, d)))

    @property
    def vocab_size(self) -> int:
        return self.E.shape[0]

    @property
    def dim(self) -> int:
        return self.E.shape[1]

    def parameters(self) -> list[Parameter]:
        return [self.E]


def embed(table: EmbeddingTable, tokens) -> list[Tensor]:
    """
    Row lookup per time step. A flat id sequence yields 1 x d rows; a
    [T x B] id matrix yields T tensors of shape [B x d].
    """
    ids = np.asarray(tokens, dtype=np.int64)
    if ids.size == 0:
        return []
    if ids.ndim == 1:
        ids = ids.reshape(-1, 1)
    return [gather_rows(table.E.value, step) for step in ids]


class LSTMCell:
    """Gate order i, f, g, o in a single [d_in x 4H] / [H x 4H] pair"""

    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator, name: str):
        self.d_in = d_in
        self.d_out = d_out
        self.W_ih = Parameter(f"{name}.W_ih", rng.uniform(-INIT_BOUND, INIT_BOUND, (d_in, 4 * d_out)))
        self.W_hh = Parameter(f"{name}.W_hh", rng.uniform(-INIT_BOUND, INIT_BOUND, (d_out, 4 * d_out)))
        self.b = Parameter(f"{name}.b", np.zeros((1, 4 * d_out)))

    def parameters(self) -> list[Parameter]:
        return [self.W_ih, self.W_hh, self.b]

    def step(self, x: Tensor, h: Tensor, c: Tensor) -> tuple[Tensor, Tensor]:
        H = self.d_out
        gates = add_row_bias(add(matmul(x, self.W_ih.value), matmul(h, self.W_hh.value)),
                             self.b.value)
        i = activation(slice_cols(gates, 0, H), "sigmoid")
        f = activation(slice_cols(gates, H, 2 * H), "sigmoid")
        g = activation(slice_cols(gates, 2 * H, 3 * H), "tanh")
        o = activation(slice_cols(gates, 3 * H, 4 * H), "sigmoid")
        c_next = add(mul(f, c), mul(i, g))
        h_next = mul(o, activation(c_next, "tanh"))
        return h_next, c_next


class RecurrentEncoder:
    """1-3 stacked LSTM cells; standard dropout on every layer's output"""

    def __init__(self, d_in: int, hidden_size: int, layers: int, dropout: float,
                 rng: np.random.Generator):
        if not 1 <= layers <= 3:
            raise ConfigurationError(f"encoder.layers must be 1-3, got {layers}")
        sizes = [hidden_size] * layers
        inputs = [d_in] + sizes[:-1]
        self.cells = [LSTMCell(n_in, n_out, rng, f"encoder.l{i}")
                      for i, (n_in, n_out) in enumerate(zip(inputs, sizes))]
        self.dropout = DropoutSpec("standard" if dropout > 0 else "none", dropout)

    @property
    def output_size(self) -> int:
        return self.cells[-1].d_out

    def parameters(self) -> list[Parameter]:
        return [p for cell in self.cells for p in cell.parameters()]

    def initial_state(self, batch_size: int = 1) -> State:
        return [(Tensor.zeros(batch_size, cell.d_out), Tensor.zeros(batch_size, cell.d_out))
                for cell in self.cells]

    def _check_state(self, state: State, batch: int):
        if len(state) != len(self.cells):
            raise ShapeError(f"state has {len(state)} layers, encoder has {len(self.cells)}")
        for layer, ((h, c), cell) in enumerate(zip(state, self.cells)):
            if h.shape != (batch, cell.d_out) or c.shape != (batch, cell.d_out):
                raise ShapeError(
                    f"layer {layer} state shapes {h.shape}/{c.shape} "
                    f"do not match ({batch}, {cell.d_out})"
                )

    def encode_sequence(self, inputs: Sequence[Tensor], state: State | None = None,
                        mode: Mode = "eval", rng: np.random.Generator | None = None
                        ) -> tuple[list[Tensor], State]:
        """Returns per-step top-layer outputs and the detached final state"""
        if not inputs:
            raise ShapeError("encode_sequence needs at least one input step")
        batch = inputs[0].shape[0]
        state = self.initial_state(batch) if state is None else state
        self._check_state(state, batch)
        for x in inputs:
            if x.shape != (batch, self.cells[0].d_in):
                raise ShapeError(f"input step of shape {x.shape}, expected ({batch}, {self.cells[0].d_in})")

        current = list(state)
        outputs = []
        for x in inputs:
            layer_in = x
            for layer, cell in enumerate(self.cells):
                h, c = cell.step(layer_in, *current[layer])
                current[layer] = (h, c)
                layer_in = apply_dropout(h, self.dropout, mode, rng)
            outputs.append(layer_in)
        return outputs, [(h.detach(), c.detach()) for h, c in current]


def encode_sequence(encoder: RecurrentEncoder, inputs: Sequence[Tensor], state_in: State | None = None,
                    mode: Mode = "eval", rng: np.random.Generator | None = None):
    return encoder.encode_sequence(inputs, state_in, mode, rng)
