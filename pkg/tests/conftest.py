import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from models.config import EncoderConfig, OutputConfig  # noqa: E402

TINY_TRAIN = """the cat sat on the mat
the dog sat on the log
a cat and a dog
the mat is on the log
"""

TINY_VALID = """the cat sat on the log
a dog sat on the mat
"""

TINY_TEST = """the dog sat on the mat
a cat is on the log
"""


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_corpus(tmp_path) -> dict[str, Path]:
    paths = {}
    for split, text in (("train", TINY_TRAIN), ("valid", TINY_VALID), ("test", TINY_TEST)):
        paths[split] = tmp_path / f"{split}.txt"
        paths[split].write_text(text, encoding="utf-8")
    return paths


@pytest.fixture
def small_encoder() -> EncoderConfig:
    return EncoderConfig(layers=1, embed_size=6, hidden_size=6, dropout=0.0)


@pytest.fixture
def drill_output() -> OutputConfig:
    return OutputConfig(kind="drill", depth=2, dropout_mode="variational", dropout_rate=0.3)


@pytest.fixture
def make_config(tmp_path, tiny_corpus):
    """Writes a fast config over the tiny corpus; `extra` TOML is appended verbatim"""

    def make(extra: str = "", name: str = "config.toml") -> Path:
        return write_config(tmp_path, tiny_corpus, extra, name)

    return make


def write_config(tmp_path: Path, corpus: dict[str, Path], extra: str = "",
                 name: str = "config.toml") -> Path:
    text = f"""
seeds = [0]
out_dir = "{(tmp_path / 'out').as_posix()}"

[data]
train = "{corpus['train'].as_posix()}"
valid = "{corpus['valid'].as_posix()}"
test = "{corpus['test'].as_posix()}"

[encoder]
layers = 1
embed_size = 6
hidden_size = 6
dropout = 0.0

[training]
epochs = 2
batch_size = 2
bptt_len = 5
lr = 1.0
""" + extra
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path
