"""
Run configuration: typed sections with validated defaults, loaded from TOML
"""
import dataclasses
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
import types
import typing
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from autodiff.tensor import ACTIVATIONS
from errors import ConfigurationError
from layers.dropout import DROPOUT_MODES
from layers.output_layers import OUTPUT_KINDS, OutputDims, validate_dims

KIND_ALIASES = {
    "tied": "weight_tying",
    "full": "full_softmax",
    "softmax": "full_softmax",
    "dual": "dual_nonlinear",
}


@dataclass(frozen=True)
class DataConfig:
    train: str = ""
    valid: str = ""
    test: str = ""
    min_count: int = 1


@dataclass(frozen=True)
class EncoderConfig:
    layers: int = 1
    embed_size: int = 400
    hidden_size: int = 400
    dropout: float = 0.4

    def __post_init__(self):
        if not 1 <= self.layers <= 3:
            raise ConfigurationError(f"encoder.layers must be 1-3, got {self.layers}")
        if self.embed_size < 1 or self.hidden_size < 1:
            raise ConfigurationError("encoder.embed_size and encoder.hidden_size must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigurationError(f"encoder.dropout must lie in [0, 1), got {self.dropout}")


@dataclass(frozen=True)
class OutputConfig:
    """Defaults follow the best language-model setting: 4 layers, 0.6 variational, sigmoid"""
    kind: str = "drill"
    depth: int = 4
    activation: str = "sigmoid"
    dropout_mode: str = "variational"
    dropout_rate: float = 0.6
    input_skip: bool = True
    interlayer_residual: bool = False
    d_joint: int | None = None
    dual_residual: bool = False

    def __post_init__(self):
        if self.kind not in OUTPUT_KINDS:
            raise ConfigurationError(f"output.kind '{self.kind}' is not one of {OUTPUT_KINDS}")
        if self.activation not in ACTIVATIONS:
            raise ConfigurationError(f"output.activation '{self.activation}' is not one of {ACTIVATIONS}")
        if self.dropout_mode not in DROPOUT_MODES:
            raise ConfigurationError(f"output.dropout_mode '{self.dropout_mode}' is not one of {DROPOUT_MODES}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigurationError(f"output.dropout_rate must lie in [0, 1), got {self.dropout_rate}")
        if self.depth < 1:
            raise ConfigurationError(f"output.depth must be positive, got {self.depth}")
        if self.d_joint is not None and self.d_joint < 1:
            raise ConfigurationError(f"output.d_joint must be positive, got {self.d_joint}")


@dataclass(frozen=True)
class TrainConfig:
    optimizer: str = "sgd"
    lr: float = 20.0
    lr_decay_factor: float = 0.25
    patience: int = 1
    clip_norm: float = 0.25
    epochs: int = 40
    bptt_len: int = 35
    batch_size: int = 20
    eval_batch_size: int = 1
    seed: int = 0
    check_finite: bool = True

    def __post_init__(self):
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigurationError(f"training.optimizer must be 'sgd' or 'adam', got '{self.optimizer}'")
        if self.lr <= 0:
            raise ConfigurationError(f"training.lr must be positive, got {self.lr}")
        if not 0.0 < self.lr_decay_factor < 1.0:
            raise ConfigurationError(f"training.lr_decay_factor must lie in (0, 1), got {self.lr_decay_factor}")
        if self.patience < 1:
            raise ConfigurationError(f"training.patience must be at least 1, got {self.patience}")
        if self.clip_norm <= 0:
            raise ConfigurationError(f"training.clip_norm must be positive, got {self.clip_norm}")
        for name in ("epochs", "bptt_len", "batch_size", "eval_batch_size"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"training.{name} must be at least 1, got {getattr(self, name)}")


@dataclass(frozen=True)
class AblateConfig:
    kinds: tuple[str, ...] = ()


@dataclass(frozen=True)
class BenchConfig:
    kinds: tuple[str, ...] = ("weight_tying", "drill:k=4")
    repetitions: int = 3

    def __post_init__(self):
        if self.repetitions < 3:
            raise ConfigurationError(f"bench.repetitions must be at least 3, got {self.repetitions}")


@dataclass(frozen=True)
class BandsConfig:
    boundaries: tuple[int, ...] = (10, 100, 1000, 10000)
    weighting: str = "token"
    split: str = "test"

    def __post_init__(self):
        if self.weighting not in ("token", "type"):
            raise ConfigurationError(f"bands.weighting must be 'token' or 'type', got '{self.weighting}'")
        if self.split not in ("train", "valid", "test"):
            raise ConfigurationError(f"bands.split must be train, valid or test, got '{self.split}'")


@dataclass(frozen=True)
class RunConfig:
    data: DataConfig = field(default_factory=DataConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    training: TrainConfig = field(default_factory=TrainConfig)
    ablate: AblateConfig = field(default_factory=AblateConfig)
    bench: BenchConfig = field(default_factory=BenchConfig)
    bands: BandsConfig = field(default_factory=BandsConfig)
    seeds: tuple[int, ...] = (0,)
    out_dir: str = "runs"

    def __post_init__(self):
        if not self.seeds:
            raise ConfigurationError("seeds must list at least one integer")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def require_paths(self, *splits: str):
        """Every named data split must point at an existing file"""
        for split in splits:
            raw = getattr(self.data, split)
            if not raw:
                raise ConfigurationError(f"data.{split} is not set")
            if not Path(raw).is_file():
                raise ConfigurationError(f"data.{split} file not found: {raw}")


SECTIONS = {
    "data": DataConfig,
    "encoder": EncoderConfig,
    "output": OutputConfig,
    "training": TrainConfig,
    "ablate": AblateConfig,
    "bench": BenchConfig,
    "bands": BandsConfig,
}


def _coerce(where: str, value, hint):
    origin = typing.get_origin(hint)
    if origin in (typing.Union, types.UnionType):
        options = [a for a in typing.get_args(hint) if a is not type(None)]
        if value is None:
            return None
        return _coerce(where, value, options[0])
    if origin is tuple:
        (item, _) = typing.get_args(hint)
        if not isinstance(value, list):
            raise ConfigurationError(f"{where} must be a list, got {type(value).__name__}")
        return tuple(_coerce(f"{where}[{i}]", v, item) for i, v in enumerate(value))
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigurationError(f"{where} must be true or false, got {value!r}")
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigurationError(f"{where} must be an integer, got {value!r}")
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigurationError(f"{where} must be a number, got {value!r}")
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigurationError(f"{where} must be a string, got {value!r}")
        return value
    raise ConfigurationError(f"{where}: unsupported field type {hint}")


def _section(cls, name: str, raw) -> object:
    if not isinstance(raw, dict):
        raise ConfigurationError(f"[{name}] must be a table")
    hints = typing.get_type_hints(cls)
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigurationError(f"unknown key(s) in [{name}]: {', '.join(unknown)}")
    values = {key: _coerce(f"{name}.{key}", value, hints[key]) for key, value in raw.items()}
    return cls(**values)


def config_from_dict(raw: dict) -> RunConfig:
    unknown = sorted(set(raw) - set(SECTIONS) - {"seeds", "out_dir"})
    if unknown:
        raise ConfigurationError(f"unknown top-level key(s): {', '.join(unknown)}")
    values = {name: _section(cls, name, raw[name]) for name, cls in SECTIONS.items() if name in raw}
    if "seeds" in raw:
        values["seeds"] = _coerce("seeds", raw["seeds"], tuple[int, ...])
    if "out_dir" in raw:
        values["out_dir"] = _coerce("out_dir", raw["out_dir"], str)
    return RunConfig(**values)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc
    cfg = config_from_dict(raw)
    base = path.parent
    data = cfg.data
    resolved = {split: str(base / getattr(data, split)) if getattr(data, split) and
                not Path(getattr(data, split)).is_absolute() else getattr(data, split)
                for split in ("train", "valid", "test")}
    return replace(cfg, data=replace(data, **resolved))


def parse_variant(spec: str, base: OutputConfig) -> OutputConfig:
    """
    Parses ablation/bench variants such as 'weight_tying', 'tied',
    'drill:k=2' or 'drill:k=4,res=on,dropout=none,act=relu,skip=off,mode=standard,rate=0.3'.
    """
    head, _, options = spec.strip().partition(":")
    kind = KIND_ALIASES.get(head, head)
    if kind not in OUTPUT_KINDS:
        raise ConfigurationError(f"unknown output kind in variant '{spec}'")
    updates: dict = {"kind": kind}
    for option in filter(None, (o.strip() for o in options.split(","))):
        key, sep, value = option.partition("=")
        if not sep:
            raise ConfigurationError(f"variant option '{option}' in '{spec}' must be key=value")
        if key == "k":
            updates["depth"] = _variant_int(spec, value)
        elif key == "dj":
            updates["d_joint"] = _variant_int(spec, value)
        elif key == "res":
            updates["interlayer_residual"] = _variant_flag(spec, value)
        elif key == "skip":
            updates["input_skip"] = _variant_flag(spec, value)
        elif key == "dual_res":
            updates["dual_residual"] = _variant_flag(spec, value)
        elif key == "act":
            updates["activation"] = value
        elif key in ("mode", "dropout"):
            updates["dropout_mode"] = value
        elif key == "rate":
            try:
                updates["dropout_rate"] = float(value)
            except ValueError:
                raise ConfigurationError(f"rate '{value}' in '{spec}' is not a number") from None
        else:
            raise ConfigurationError(f"unknown variant option '{key}' in '{spec}'")
    return replace(base, **updates)


def _variant_int(spec: str, value: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigurationError(f"'{value}' in variant '{spec}' is not an integer") from None


def _variant_flag(spec: str, value: str) -> bool:
    if value in ("on", "true", "1"):
        return True
    if value in ("off", "false", "0"):
        return False
    raise ConfigurationError(f"'{value}' in variant '{spec}' must be on or off")


def variant_label(cfg: OutputConfig, base: OutputConfig) -> str:
    """drill-k4, drill-k4+res, drill-k2-nodrop, dual_nonlinear+dres-dj32, ...

    Every field that changes the model and differs from the base config shows up
    in the label. Kinds without a label encoder keep their bare name.
    """
    if cfg.kind == "drill":
        label = f"drill-k{cfg.depth}"
        if cfg.interlayer_residual:
            label += "+res"
        if not cfg.input_skip:
            label += "-noskip"
    elif cfg.kind == "dual_nonlinear":
        label = "dual_nonlinear"
        if cfg.dual_residual:
            label += "+dres"
        if cfg.d_joint is not None and cfg.d_joint != base.d_joint:
            label += f"-dj{cfg.d_joint}"
    else:
        return cfg.kind
    if cfg.dropout_mode == "none" or cfg.dropout_rate == 0.0:
        label += "-nodrop"
    else:
        if cfg.dropout_mode == "standard":
            label += "-std"
        if cfg.dropout_rate != base.dropout_rate:
            label += f"-p{cfg.dropout_rate:g}"
    if cfg.activation != base.activation:
        label += f"-{cfg.activation}"
    return label


def resolve_variants(specs: typing.Iterable[str],
                     cfg: RunConfig) -> list[tuple[str, OutputConfig]]:
    """Parses, dimension-checks and labels every variant up front; labels must be unique"""
    resolved: list[tuple[str, OutputConfig]] = []
    seen: dict[str, str] = {}
    for spec in specs:
        output = parse_variant(spec, cfg.output)
        dims = OutputDims(1, cfg.encoder.embed_size, cfg.encoder.hidden_size,
                          output.d_joint or cfg.encoder.embed_size, output.depth)
        try:
            validate_dims(output.kind, dims, output.dual_residual)
        except ConfigurationError as err:
            raise ConfigurationError(f"variant '{spec}': {err}") from None
        label = variant_label(output, cfg.output)
        if label in seen:
            raise ConfigurationError(f"variants '{seen[label]}' and '{spec}' both resolve to '{label}'")
        seen[label] = spec
        resolved.append((label, output))
    return resolved
