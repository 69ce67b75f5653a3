"""
Vocabulary construction, id encoding, contiguous batching and BPTT windows
"""
import hashlib
import logging
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from errors import ConfigurationError, DataError

logger = logging.getLogger(__name__)

UNK = "<unk>"
EOS = "<eos>"


class Vocab:
    """Dense ids with training-split counts; <unk> and <eos> always present"""

    def __init__(self, tokens: list[str], counts: list[int]):
        if len(tokens) != len(counts):
            raise DataError("vocab tokens and counts differ in length")
        self.tokens = list(tokens)
        self.counts = np.asarray(counts, dtype=np.int64)
        self.index = {tok: i for i, tok in enumerate(self.tokens)}
        for reserved in (UNK, EOS):
            if reserved not in self.index:
                raise DataError(f"vocab is missing reserved token {reserved}")

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    @property
    def unk_id(self) -> int:
        return self.index[UNK]

    @property
    def eos_id(self) -> int:
        return self.index[EOS]

    def id_of(self, token: str) -> int:
        return self.index.get(token, self.unk_id)

    def token_of(self, i: int) -> str:
        return self.tokens[i]

    def count_of(self, token: str) -> int:
        return int(self.counts[self.index[token]])

    def encode_lines(self, lines: Iterable[str]) -> np.ndarray:
        ids = []
        for line in lines:
            ids.extend(self.id_of(tok) for tok in line.split())
            ids.append(self.eos_id)
        return np.asarray(ids, dtype=np.int64)

    def encode_text(self, text: str) -> np.ndarray:
        return self.encode_lines(text.splitlines())

    def encode_file(self, path: str | Path) -> np.ndarray:
        return self.encode_text(read_text(path))

    def export_text(self) -> str:
        return "".join(f"{tok}\t{count}\n" for tok, count in zip(self.tokens, self.counts))

    def export(self, path: str | Path, header: str = ""):
        """The optional header line is not part of the digest"""
        Path(path).write_text(header + self.export_text(), encoding="utf-8")

    def digest(self) -> str:
        """SHA-256 of the export text; checkpoints reference vocabularies by it"""
        return hashlib.sha256(self.export_text().encode("utf-8")).hexdigest()


def read_text(path: str | Path) -> str:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"corpus file not found: {path}")
    return path.read_text(encoding="utf-8")


def build_vocab(train_text: str, min_count: int = 1) -> Vocab:
    """
    One <eos> per line. Types below min_count fold into <unk>; a literal
    <unk> in the text is counted as an ordinary token. Ids are ordered by
    descending count, ties broken lexicographically.
    """
    if min_count < 1:
        raise ConfigurationError(f"min_count must be at least 1, got {min_count}")
    lines = train_text.splitlines()
    raw = Counter()
    for line in lines:
        raw.update(line.split())
    if not raw:
        raise DataError("training corpus contains no tokens")
    raw[EOS] += len(lines)

    counts = Counter({UNK: 0})
    for tok, n in raw.items():
        if n >= min_count or tok in (UNK, EOS):
            counts[tok] += n
        else:
            counts[UNK] += n

    ordered = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    vocab = Vocab([tok for tok, _ in ordered], [n for _, n in ordered])
    logger.debug("built vocab of %d types from %d lines", len(vocab), len(lines))
    return vocab


@dataclass
class BatchedCorpus:
    """[batch_size x strip_len]; row b is a contiguous strip of the id stream"""
    data: np.ndarray

    @property
    def batch_size(self) -> int:
        return self.data.shape[0]

    @property
    def strip_len(self) -> int:
        return self.data.shape[1]


def batchify(ids, batch_size: int) -> BatchedCorpus:
    """Drops the remainder after dividing the stream into batch_size strips"""
    if batch_size < 1:
        raise ConfigurationError(f"batch_size must be at least 1, got {batch_size}")
    ids = np.asarray(ids, dtype=np.int64).reshape(-1)
    if len(ids) < 2 * batch_size:
        raise DataError(
            f"{len(ids)} tokens are too few for batch_size {batch_size} "
            f"(need at least {2 * batch_size})"
        )
    strip_len = len(ids) // batch_size
    return BatchedCorpus(ids[: batch_size * strip_len].reshape(batch_size, strip_len))


def bptt_windows(bc: BatchedCorpus, bptt_len: int) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Non-overlapping [B x t] windows; targets are inputs shifted by one"""
    if bptt_len < 1:
        raise ConfigurationError(f"bptt_len must be at least 1, got {bptt_len}")
    last = bc.strip_len - 1
    for start in range(0, last, bptt_len):
        stop = min(start + bptt_len, last)
        yield bc.data[:, start:stop], bc.data[:, start + 1:stop + 1]


def count_windows(bc: BatchedCorpus, bptt_len: int) -> int:
    return -(-(bc.strip_len - 1) // bptt_len)
