"""
Checkpoint files: a text header, a JSON manifest, then raw float64 arrays

    DRILLCKPT <version> <manifest-bytes>\\n
    {"format_version": ..., "config": ..., "arrays": [{name, shape, offset, ...}], ...}
    <little-endian IEEE-754 float64 arrays in manifest order>
"""
import dataclasses
import json
import logging
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from errors import CheckpointError, ConfigurationError, ShapeError
from layers.language_model import LanguageModel, build_language_model
from models.config import EncoderConfig, OutputConfig, RunConfig, config_from_dict

logger = logging.getLogger(__name__)

MAGIC = "DRILLCKPT"
FORMAT_VERSION = 1
_FLOAT = np.dtype("<f8")


class CheckpointShapeError(CheckpointError, ShapeError):
    """Checkpoint parameters do not match the model built from the config"""


@dataclass
class CheckpointFile:
    manifest: dict
    arrays: dict[str, np.ndarray]

    @property
    def config(self) -> RunConfig:
        return config_from_dict(self.manifest["config"])

    @property
    def vocab_hash(self) -> str:
        return self.manifest["vocab_hash"]

    @property
    def vocab_size(self) -> int:
        return self.manifest["vocab_size"]

    @property
    def epoch(self) -> int:
        return self.manifest["epoch"]

    @property
    def best_val_ppl(self) -> float:
        value = self.manifest["best_val_ppl"]
        return math.inf if value is None else value

    @property
    def encoder_config(self) -> EncoderConfig:
        return EncoderConfig(**self.manifest["model"]["encoder"])

    @property
    def output_config(self) -> OutputConfig:
        return OutputConfig(**self.manifest["model"]["output"])

    def param_arrays(self) -> dict[str, np.ndarray]:
        names = [e["name"] for e in self.manifest["arrays"] if e["kind"] == "param"]
        return {name: self.arrays[name] for name in names}

    def optimizer_arrays(self) -> dict[str, np.ndarray]:
        names = [e["name"] for e in self.manifest["arrays"] if e["kind"] == "optimizer"]
        return {name: self.arrays[name] for name in names}


def save_checkpoint(model: LanguageModel, path: str | Path, *, config: RunConfig,
                    vocab_hash: str, optimizer=None, epoch: int = 0,
                    best_val_ppl: float = math.inf):
    path = Path(path)
    entries = [("param", p.name, p.value.values) for p in model.parameters()]
    if optimizer is not None:
        entries += [("optimizer", name, arr) for name, arr in optimizer.state_arrays().items()]

    directory, chunks, offset = [], [], 0
    for kind, name, arr in entries:
        raw = np.ascontiguousarray(arr, dtype=_FLOAT).tobytes()
        directory.append({"kind": kind, "name": name, "shape": list(arr.shape),
                          "offset": offset, "nbytes": len(raw)})
        chunks.append(raw)
        offset += len(raw)

    manifest = {
        "format_version": FORMAT_VERSION,
        "config": config.to_dict(),
        "model": {
            "encoder": dataclasses.asdict(model.encoder_config),
            "output": dataclasses.asdict(model.output_config),
        },
        "vocab_hash": vocab_hash,
        "vocab_size": model.vocab_size,
        "epoch": epoch,
        "best_val_ppl": None if math.isinf(best_val_ppl) else best_val_ppl,
        "optimizer": None if optimizer is None else {
            "kind": optimizer.name, "lr": optimizer.lr, "steps": optimizer.steps,
        },
        "arrays": directory,
    }
    text = json.dumps(manifest, sort_keys=True).encode("utf-8")
    header = f"{MAGIC} {FORMAT_VERSION} {len(text)}\n".encode("ascii")

    tmp = path.with_name(path.name + ".tmp")
    try:
        with open(tmp, "wb") as f:
            f.write(header)
            f.write(text)
            for chunk in chunks:
                f.write(chunk)
        os.replace(tmp, path)
    except BaseException:
        tmp.unlink(missing_ok=True)
        raise
    logger.debug("saved checkpoint %s (%d arrays, %d bytes)", path, len(directory), offset)


def read_checkpoint(path: str | Path) -> CheckpointFile:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc

    newline = blob.find(b"\n")
    parts = blob[:newline].decode("ascii", errors="replace").split() if newline > 0 else []
    if len(parts) != 3 or parts[0] != MAGIC or not parts[2].isdigit():
        raise CheckpointError(f"{path} is not a checkpoint file")
    if parts[1] != str(FORMAT_VERSION):
        raise CheckpointError(
            f"{path} has format version {parts[1]}, this build reads version {FORMAT_VERSION}"
        )
    start = newline + 1
    end = start + int(parts[2])
    if end > len(blob):
        raise CheckpointError(f"{path} is truncated inside the manifest")
    try:
        manifest = json.loads(blob[start:end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path} has a corrupt manifest: {exc}") from exc
    if manifest.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"{path}: manifest version {manifest.get('format_version')} mismatch")

    try:
        return CheckpointFile(manifest, _read_arrays(path, manifest, blob[end:]))
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"{path} has a malformed manifest: {exc}") from exc


def _read_arrays(path: Path, manifest: dict, payload: bytes) -> dict[str, np.ndarray]:
    expected = sum(e["nbytes"] for e in manifest["arrays"])
    if len(payload) != expected:
        raise CheckpointError(
            f"{path} is truncated or padded: payload has {len(payload)} bytes, manifest lists {expected}"
        )
    arrays = {}
    for entry in manifest["arrays"]:
        shape = tuple(entry["shape"])
        lo = entry["offset"]
        if entry["nbytes"] != int(np.prod(shape)) * _FLOAT.itemsize:
            raise CheckpointError(f"{path}: array {entry['name']} size disagrees with its shape")
        raw = payload[lo:lo + entry["nbytes"]]
        arrays[entry["name"]] = np.frombuffer(raw, dtype=_FLOAT).reshape(shape).astype(np.float64)
    return arrays


def restore_model(ckpt: CheckpointFile, encoder_config: EncoderConfig | None = None,
                  output_config: OutputConfig | None = None) -> LanguageModel:
    """
    Builds a model from the given (or recorded) configs and fills it from the
    checkpoint. Every shape is validated before any parameter is written.
    """
    encoder_config = encoder_config or ckpt.encoder_config
    output_config = output_config or ckpt.output_config
    try:
        model = build_language_model(ckpt.vocab_size, encoder_config, output_config,
                                     np.random.default_rng(0))
    except ConfigurationError as exc:
        raise CheckpointError(f"checkpoint config cannot be built: {exc}") from exc

    stored = ckpt.param_arrays()
    expected = model.parameters()
    for p in expected:
        if p.name not in stored:
            raise CheckpointShapeError(f"parameter '{p.name}' is missing from the checkpoint")
        if stored[p.name].shape != p.shape:
            raise CheckpointShapeError(
                f"parameter '{p.name}' has shape {stored[p.name].shape} in the checkpoint, "
                f"the config expects {p.shape}"
            )
    extra = sorted(set(stored) - {p.name for p in expected})
    if extra:
        raise CheckpointShapeError(f"checkpoint has parameter '{extra[0]}' the config does not define")

    for p in expected:
        p.assign(stored[p.name])
    return model


def load_checkpoint(path: str | Path, encoder_config: EncoderConfig | None = None,
                    output_config: OutputConfig | None = None) -> LanguageModel:
    return restore_model(read_checkpoint(path), encoder_config, output_config)
