"""
Embedding + recurrent context encoder + pluggable output layer
"""
import numpy as np

from autodiff.tensor import Parameter, Tensor, concat_rows, softmax_cross_entropy
from errors import ConfigurationError, ShapeError
from layers.dropout import DropoutSpec, Mode
from layers.encoder import EmbeddingTable, RecurrentEncoder, State, embed
from layers.output_layers import OutputDims, OutputLayer, build_output_layer
from models.config import EncoderConfig, OutputConfig


class LanguageModel:
    """Holds the three parameter groups reported by param_report"""

    def __init__(self, embedding: EmbeddingTable, encoder: RecurrentEncoder,
                 output: OutputLayer, encoder_config: EncoderConfig,
                 output_config: OutputConfig):
        self.embedding = embedding
        self.encoder = encoder
        self.output = output
        self.encoder_config = encoder_config
        self.output_config = output_config

    @property
    def vocab_size(self) -> int:
        return self.embedding.vocab_size

    def parameter_groups(self) -> dict[str, list[Parameter]]:
        return {
            "embedding": self.embedding.parameters(),
            "encoder": self.encoder.parameters(),
            "output": self.output.parameters(),
        }

    def parameters(self) -> list[Parameter]:
        return [p for group in self.parameter_groups().values() for p in group]

    def initial_state(self, batch_size: int = 1) -> State:
        return self.encoder.initial_state(batch_size)

    def forward(self, inputs: np.ndarray, state: State | None, mode: Mode,
                rng: np.random.Generator | None) -> tuple[Tensor, State]:
        """
        inputs is [B x T]. Returns logits stacked time-major as [T*B x |V|]
        and the detached final state. The label side is prepared once.
        """
        if mode not in ("train", "eval"):
            raise ConfigurationError(f"mode must be 'train' or 'eval', got '{mode}'")
        ids = np.asarray(inputs, dtype=np.int64)
        if ids.ndim != 2 or ids.shape[1] < 1:
            raise ShapeError(f"inputs must be a non-empty [B x T] id matrix, got shape {ids.shape}")
        steps = embed(self.embedding, ids.T)
        hidden, state_out = self.encoder.encode_sequence(steps, state, mode, rng)
        prepared = self.output.prepare(self.embedding.E.value, mode, rng)
        return self.output.project(prepared, concat_rows(hidden)), state_out

    def window_loss(self, inputs: np.ndarray, targets: np.ndarray, state: State | None,
                    mode: Mode, rng: np.random.Generator | None) -> tuple[Tensor, State]:
        targets = np.asarray(targets, dtype=np.int64)
        if targets.shape != np.shape(inputs):
            raise ShapeError(f"targets {targets.shape} do not align with inputs {np.shape(inputs)}")
        logits, state_out = self.forward(inputs, state, mode, rng)
        return softmax_cross_entropy(logits, targets.T.reshape(-1)), state_out


def build_language_model(vocab_size: int, encoder_config: EncoderConfig,
                         output_config: OutputConfig, rng: np.random.Generator) -> LanguageModel:
    """Embedding, encoder, then output layer drawn from rng in that order"""
    d, d_h = encoder_config.embed_size, encoder_config.hidden_size
    if output_config.kind in ("weight_tying", "drill") and d != d_h:
        raise ConfigurationError(
            f"{output_config.kind}: d must equal d_h "
            f"(encoder.embed_size={d}, encoder.hidden_size={d_h})"
        )
    dims = OutputDims(
        vocab_size=vocab_size, d=d, d_h=d_h,
        d_j=output_config.d_joint or d,
        k=output_config.depth,
    )
    embedding = EmbeddingTable(vocab_size, d, rng)
    encoder = RecurrentEncoder(d, d_h, encoder_config.layers, encoder_config.dropout, rng)
    output = build_output_layer(
        output_config.kind, dims,
        dropout=DropoutSpec(output_config.dropout_mode, output_config.dropout_rate),
        activation=output_config.activation,
        input_skip=output_config.input_skip,
        interlayer_residual=output_config.interlayer_residual,
        dual_residual=output_config.dual_residual,
        rng=rng,
    )
    return LanguageModel(embedding, encoder, output, encoder_config, output_config)


def output_dims(model: LanguageModel) -> OutputDims:
    cfg = model.output_config
    return OutputDims(
        vocab_size=model.vocab_size,
        d=model.encoder_config.embed_size,
        d_h=model.encoder_config.hidden_size,
        d_j=cfg.d_joint or model.encoder_config.embed_size,
        k=cfg.depth,
    )
