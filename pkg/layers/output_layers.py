"""
Output-layer parameterizations: logits = g_in(h) · g_out(E)ᵀ + b

Contexts are rows: h is [B x d_h], logits are [B x |V|]. Every layer splits
into prepare() (label side, once per window) and project() (per context).
"""
from dataclasses import dataclass
from typing import ClassVar

import numpy as np

from autodiff.tensor import (ACTIVATIONS, Parameter, Tensor, activation, add,
                             add_row_bias, matmul, transpose)
from errors import ConfigurationError, ShapeError
from layers.dropout import DropoutSpec, Mode, apply_dropout

OUTPUT_KINDS = ("full_softmax", "weight_tying", "bilinear", "dual_nonlinear", "drill")

INIT_BOUND = 0.1


@dataclass(frozen=True)
class OutputDims:
    vocab_size: int
    d: int
    d_h: int
    d_j: int | None = None
    k: int | None = None


def validate_dims(kind: str, dims: OutputDims, dual_residual: bool = False):
    if kind not in OUTPUT_KINDS:
        raise ConfigurationError(f"unknown output kind '{kind}', expected one of {OUTPUT_KINDS}")
    for name in ("vocab_size", "d", "d_h"):
        if getattr(dims, name) < 1:
            raise ConfigurationError(f"{name} must be positive, got {getattr(dims, name)}")
    if kind in ("weight_tying", "drill") and dims.d != dims.d_h:
        raise ConfigurationError(
            f"{kind}: d must equal d_h (got d={dims.d}, d_h={dims.d_h})"
        )
    if kind == "dual_nonlinear":
        if dims.d_j is None or dims.d_j < 1:
            raise ConfigurationError("dual_nonlinear: d_j must be a positive integer")
        if dual_residual and not dims.d == dims.d_j == dims.d_h:
            raise ConfigurationError(
                "dual_nonlinear residuals need d = d_j = d_h "
                f"(got d={dims.d}, d_j={dims.d_j}, d_h={dims.d_h})"
            )
    if kind == "drill" and (dims.k is None or dims.k < 1):
        raise ConfigurationError("drill: depth k must be a positive integer")


def param_count(kind: str, vocab_size: int, d: int, d_h: int,
                d_j: int | None = None, k: int | None = None) -> int:
    """Dedicated output-layer parameters, biases included, shared E excluded"""
    validate_dims(kind, OutputDims(vocab_size, d, d_h, d_j, k))
    if kind == "full_softmax":
        return d_h * vocab_size + vocab_size
    if kind == "weight_tying":
        return vocab_size
    if kind == "bilinear":
        return d * d_h + vocab_size
    if kind == "dual_nonlinear":
        return d * d_j + d_j + d_j * d_h + d_j + vocab_size
    return k * (d * d + d) + vocab_size


def _uniform(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    return rng.uniform(-INIT_BOUND, INIT_BOUND, size=(rows, cols))


def _check_activation(kind: str):
    if kind not in ACTIVATIONS:
        raise ConfigurationError(f"unknown activation '{kind}', expected one of {ACTIVATIONS}")


class LabelEncoder:
    """
    k-layer residual label network over the embedding matrix E.

    For i = 1..k:
        A = σ(E⁽ⁱ⁻¹⁾ U⁽ⁱ⁾ + b_u⁽ⁱ⁾)
        E⁽ⁱ⁾ = dropout(A) [+ E⁽ⁱ⁻¹⁾ if interlayer_residual] [+ E if input_skip]

    Dropout wraps the nonlinearity only, so skip paths are never dropped.
    With both flags on, layer 1 adds E twice (E⁽⁰⁾ is E).
    """

    def __init__(self, d: int, depth: int, activation: str = "sigmoid",
                 dropout: DropoutSpec = DropoutSpec(), input_skip: bool = True,
                 interlayer_residual: bool = False,
                 rng: np.random.Generator | None = None, prefix: str = "output"):
        if depth < 1:
            raise ConfigurationError(f"label encoder depth must be positive, got {depth}")
        _check_activation(activation)
        rng = rng if rng is not None else np.random.default_rng(0)
        self.d = d
        self.depth = depth
        self.activation = activation
        self.dropout = dropout
        self.input_skip = input_skip
        self.interlayer_residual = interlayer_residual
        self.layers = [
            (Parameter(f"{prefix}.U{i}", _uniform(rng, d, d)),
             Parameter(f"{prefix}.b_u{i}", np.zeros((1, d))))
            for i in range(1, depth + 1)
        ]

    def parameters(self) -> list[Parameter]:
        return [p for layer in self.layers for p in layer]

    def encode(self, E: Tensor, mode: Mode, rng: np.random.Generator | None) -> Tensor:
        if E.shape[1] != self.d:
            raise ShapeError(f"label encoder expects {self.d} columns, got E of shape {E.shape}")
        current = E
        for U, b in self.layers:
            out = apply_dropout(
                activation(add_row_bias(matmul(current, U.value), b.value), self.activation),
                self.dropout, mode, rng,
            )
            if self.interlayer_residual:
                out = add(out, current)
            if self.input_skip:
                out = add(out, E)
            current = out
        return current


def encode_labels(enc: LabelEncoder, E: Tensor, mode: Mode,
                  rng: np.random.Generator | None) -> Tensor:
    return enc.encode(E, mode, rng)


class OutputLayer:
    """Base class; subclasses are the five kinds"""

    kind: ClassVar[str]

    def __init__(self, vocab_size: int):
        self.vocab_size = vocab_size
        self.bias = Parameter("output.b", np.zeros((1, vocab_size)))

    def parameters(self) -> list[Parameter]:
        return [self.bias]

    def prepare(self, E: Tensor, mode: Mode, rng: np.random.Generator | None):
        """Label-side work shared by every context in a window"""
        raise NotImplementedError

    def project(self, prepared, h: Tensor) -> Tensor:
        raise NotImplementedError

    def logits(self, E: Tensor, h: Tensor, mode: Mode = "eval",
               rng: np.random.Generator | None = None) -> Tensor:
        return self.project(self.prepare(E, mode, rng), h)

    def _finish(self, scores: Tensor) -> Tensor:
        if scores.shape[1] != self.vocab_size:
            raise ShapeError(
                f"{self.kind}: produced {scores.shape[1]} logits for a vocabulary of {self.vocab_size}"
            )
        return add_row_bias(scores, self.bias.value)


class FullSoftmax(OutputLayer):
    kind = "full_softmax"

    def __init__(self, dims: OutputDims, rng: np.random.Generator):
        super().__init__(dims.vocab_size)
        self.W = Parameter("output.W", _uniform(rng, dims.d_h, dims.vocab_size))

    def parameters(self):
        return [self.W, self.bias]

    def prepare(self, E, mode, rng):
        return None

    def project(self, prepared, h):
        return self._finish(matmul(h, self.W.value))


class WeightTying(OutputLayer):
    kind = "weight_tying"

    def __init__(self, dims: OutputDims, rng: np.random.Generator):
        super().__init__(dims.vocab_size)

    def prepare(self, E, mode, rng):
        return transpose(E)

    def project(self, labels_t, h):
        return self._finish(matmul(h, labels_t))


class Bilinear(OutputLayer):
    kind = "bilinear"

    def __init__(self, dims: OutputDims, rng: np.random.Generator):
        super().__init__(dims.vocab_size)
        self.W_l = Parameter("output.W_l", _uniform(rng, dims.d, dims.d_h))

    def parameters(self):
        return [self.W_l, self.bias]

    def prepare(self, E, mode, rng):
        return transpose(self.W_l.value), transpose(E)

    def project(self, prepared, h):
        w_t, labels_t = prepared
        return self._finish(matmul(matmul(h, w_t), labels_t))


class DualNonlinear(OutputLayer):
    """σ(E U + b_u) for labels, σ(V h + b_v) for the context, joined by a dot product"""
    kind = "dual_nonlinear"

    def __init__(self, dims: OutputDims, rng: np.random.Generator, activation: str = "sigmoid",
                 dropout: DropoutSpec = DropoutSpec(), residual: bool = False):
        super().__init__(dims.vocab_size)
        _check_activation(activation)
        self.activation = activation
        self.dropout = dropout
        self.residual = residual
        self.U = Parameter("output.U", _uniform(rng, dims.d, dims.d_j))
        self.b_u = Parameter("output.b_u", np.zeros((1, dims.d_j)))
        self.V = Parameter("output.V", _uniform(rng, dims.d_j, dims.d_h))
        self.b_v = Parameter("output.b_v", np.zeros((1, dims.d_j)))

    def parameters(self):
        return [self.U, self.b_u, self.V, self.b_v, self.bias]

    def prepare(self, E, mode, rng):
        labels = activation(add_row_bias(matmul(E, self.U.value), self.b_u.value), self.activation)
        labels = apply_dropout(labels, self.dropout, mode, rng)
        if self.residual:
            labels = add(labels, E)
        return transpose(labels), transpose(self.V.value)

    def project(self, prepared, h):
        labels_t, v_t = prepared
        context = activation(add_row_bias(matmul(h, v_t), self.b_v.value), self.activation)
        if self.residual:
            context = add(context, h)
        return self._finish(matmul(context, labels_t))


class Drill(OutputLayer):
    """Deep residual label encoder; the context side is the identity"""
    kind = "drill"

    def __init__(self, dims: OutputDims, rng: np.random.Generator, activation: str = "sigmoid",
                 dropout: DropoutSpec = DropoutSpec(), input_skip: bool = True,
                 interlayer_residual: bool = False):
        super().__init__(dims.vocab_size)
        self.encoder = LabelEncoder(dims.d, dims.k, activation, dropout, input_skip,
                                    interlayer_residual, rng)

    def parameters(self):
        return self.encoder.parameters() + [self.bias]

    def prepare(self, E, mode, rng):
        return transpose(self.encoder.encode(E, mode, rng))

    def project(self, labels_t, h):
        return self._finish(matmul(h, labels_t))


def build_output_layer(kind: str, dims: OutputDims, dropout: DropoutSpec = DropoutSpec(),
                       activation: str = "sigmoid", input_skip: bool = True,
                       interlayer_residual: bool = False, dual_residual: bool = False,
                       rng: np.random.Generator | None = None) -> OutputLayer:
    """Weights uniform in [-0.1, 0.1] from rng, biases zero"""
    validate_dims(kind, dims, dual_residual)
    _check_activation(activation)
    rng = rng if rng is not None else np.random.default_rng(0)
    if kind == "full_softmax":
        return FullSoftmax(dims, rng)
    if kind == "weight_tying":
        return WeightTying(dims, rng)
    if kind == "bilinear":
        return Bilinear(dims, rng)
    if kind == "dual_nonlinear":
        return DualNonlinear(dims, rng, activation, dropout, dual_residual)
    return Drill(dims, rng, activation, dropout, input_skip, interlayer_residual)
