"""
Sample corpus generator for desk-scale runs and tests
"""
import logging
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)


def generate_sentences(n_tokens: int, vocab_size: int = 2000, n_classes: int = 40,
                       seed: int = 0, zipf_exponent: float = 1.1) -> list[str]:
    """
    Returns whitespace-tokenized sentences drawn from a class-bigram model:
    the next word's class depends on the current class, and words inside a
    class follow a Zipfian law. Rare words therefore share contexts with
    frequent words of the same class.
    """
    rng = np.random.default_rng(seed)
    words = [f"w{i:05d}" for i in range(vocab_size)]
    word_class = rng.integers(0, n_classes, size=vocab_size)
    members = [np.flatnonzero(word_class == c) for c in range(n_classes)]
    members = [m if len(m) else np.array([c % vocab_size]) for c, m in enumerate(members)]

    global_rank = np.arange(1, vocab_size + 1, dtype=np.float64) ** -zipf_exponent
    emission_cdf = []
    for m in members:
        weights = np.cumsum(global_rank[m])
        emission_cdf.append(weights / weights[-1])

    # sparse class transitions: each class prefers a handful of successors
    transitions = np.cumsum(rng.dirichlet(np.full(n_classes, 0.1), size=n_classes), axis=1)
    transitions /= transitions[:, -1:]

    sentences = []
    produced = 0
    while produced < n_tokens:
        length = int(rng.integers(5, 26))
        cls = int(rng.integers(0, n_classes))
        tokens = []
        for _ in range(length):
            pick = min(int(np.searchsorted(emission_cdf[cls], rng.random(), side="right")),
                       len(members[cls]) - 1)
            word = members[cls][pick]
            tokens.append(words[word])
            cls = min(int(np.searchsorted(transitions[cls], rng.random(), side="right")),
                      n_classes - 1)
        sentences.append(" ".join(tokens))
        produced += length + 1
    return sentences


def write_sample_corpus(out_dir: str | Path, train_tokens: int = 200_000,
                        valid_tokens: int = 20_000, test_tokens: int = 20_000,
                        vocab_size: int = 3000, seed: int = 0) -> dict[str, Path]:
    """Writes train.txt, valid.txt and test.txt drawn from one shared model"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    total = train_tokens + valid_tokens + test_tokens
    sentences = generate_sentences(total, vocab_size=vocab_size, seed=seed)

    paths = {}
    start = 0
    for split, budget in (("train", train_tokens), ("valid", valid_tokens), ("test", test_tokens)):
        chunk, used = [], 0
        while start < len(sentences) and used < budget:
            chunk.append(sentences[start])
            used += len(sentences[start].split()) + 1
            start += 1
        paths[split] = out_dir / f"{split}.txt"
        paths[split].write_text("\n".join(chunk) + "\n", encoding="utf-8")
        logger.info("wrote %s (%d sentences, %d tokens)", paths[split], len(chunk), used)
    return paths
