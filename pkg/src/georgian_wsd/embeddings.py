"""Skip-gram word embeddings with negative sampling.

Trains 128-dimensional vectors (by default) over a tokenized corpus file:
one sentence per line, tokens separated by spaces.  Training is seeded and
single-threaded, so a (corpus, config) pair fully determines the result.
"""

import struct
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import backend
from ._kernels_py import sgns_pair_update
from .formats import FormatError, read_exact
from .rng import Pcg32, STREAM_EMB_INIT, STREAM_EMB_SUBSAMPLE, STREAM_EMB_TRAIN

MAGIC = b"WSDE"
FORMAT_VERSION = 1

NEGATIVE_TABLE_POWER = 0.75


@dataclass
class Vocabulary:
    """Corpus words kept at min_count, ordered by count desc then lexicographic."""

    words: list
    index: dict
    counts: dict
    min_count: int = 10

    @classmethod
    def from_counts(cls, counts: Counter, min_count: int) -> "Vocabulary":
        kept = [(w, c) for w, c in counts.items() if c >= min_count]
        kept.sort(key=lambda wc: (-wc[1], wc[0]))
        words = [w for w, _ in kept]
        return cls(
            words=words,
            index={w: i for i, w in enumerate(words)},
            counts={w: c for w, c in kept},
            min_count=min_count,
        )

    def __len__(self):
        return len(self.words)

    def count_array(self):
        return np.array([self.counts[w] for w in self.words], dtype=np.int64)

    def __eq__(self, other):
        return (
            isinstance(other, Vocabulary)
            and self.words == other.words
            and self.counts == other.counts
        )


@dataclass
class EmbeddingConfig:
    dimension: int = 128
    window: int = 10
    min_count: int = 10
    epochs: int = 20
    negative_samples: int = 5
    learning_rate: float = 0.025
    min_learning_rate: float = 0.0001
    subsample: float = 0.0  # frequency threshold; 0 disables subsampling
    table_size: int = 10_000_000
    seed: int = 42

    def __post_init__(self):
        if self.dimension < 1 or self.window < 1 or self.negative_samples < 1:
            raise ValueError("dimension, window and negative_samples must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


@dataclass
class EmbeddingMatrix:
    vocab: Vocabulary
    input_vectors: np.ndarray  # (V, D) float32, the word vectors
    output_vectors: np.ndarray  # (V, D) float32, training-side context vectors

    @property
    def dimension(self) -> int:
        return self.input_vectors.shape[1]

    def vector(self, word: str):
        return self.input_vectors[self.vocab.index[word]]


def build_vocabulary(corpus_path, min_count: int) -> Vocabulary:
    """Count whitespace tokens over the corpus and keep those at min_count."""
    counts = Counter()
    try:
        fh = open(corpus_path, encoding="utf-8")
    except OSError as exc:
        raise OSError("cannot read corpus file %s: %s" % (corpus_path, exc)) from exc
    with fh:
        for line in fh:
            counts.update(line.split())
    vocab = Vocabulary.from_counts(counts, min_count)
    if len(vocab) == 0:
        raise ValueError("empty vocabulary: no token reaches min_count=%d" % min_count)
    return vocab


def init_matrix(vocab: Vocabulary, config: EmbeddingConfig) -> EmbeddingMatrix:
    """Seeded init: input rows uniform in [-0.5/D, 0.5/D), output rows zero."""
    V, D = len(vocab), config.dimension
    raw = np.empty(V * D, dtype=np.uint32)
    state = Pcg32(config.seed, STREAM_EMB_INIT).state_array()
    backend.rng_fill_u32(state, raw)
    inp = ((raw.astype(np.float64) * 2.0**-32 - 0.5) / D).astype(np.float32).reshape(V, D)
    out = np.zeros((V, D), dtype=np.float32)
    return EmbeddingMatrix(vocab=vocab, input_vectors=inp, output_vectors=out)


def build_negative_table(counts: np.ndarray, table_size: int) -> np.ndarray:
    """Word-index table approximating the unigram^0.75 distribution."""
    powed = counts.astype(np.float64) ** NEGATIVE_TABLE_POWER
    cum = np.cumsum(powed)
    bounds = np.floor(cum / cum[-1] * table_size).astype(np.int64)
    bounds[-1] = table_size
    reps = np.diff(bounds, prepend=0)
    return np.repeat(np.arange(len(counts), dtype=np.int32), reps)


def sgns_pair_step(center: int, context: int, negatives, lr: float, matrix: EmbeddingMatrix) -> float:
    """Public per-pair update; see _kernels_py.sgns_pair_update for the math."""
    return sgns_pair_update(matrix.input_vectors, matrix.output_vectors, center, context, negatives, lr)


def _encode_corpus(corpus_path, vocab: Vocabulary, config: EmbeddingConfig):
    """Corpus lines -> vocabulary index arrays, dropping OOV tokens.

    Optional frequency subsampling is applied here, once, from its own
    seeded stream, so the training stream is untouched by the toggle.
    """
    rng = Pcg32(config.seed, STREAM_EMB_SUBSAMPLE)
    total = sum(vocab.counts.values())
    keep_prob = None
    if config.subsample > 0.0:
        freq = vocab.count_array() / total
        keep_prob = np.minimum(1.0, np.sqrt(config.subsample / freq) + config.subsample / freq)
    sentences = []
    with open(corpus_path, encoding="utf-8") as fh:
        for line in fh:
            ids = []
            for tok in line.split():
                wid = vocab.index.get(tok)
                if wid is None:
                    continue
                if keep_prob is not None and rng.next_f64() >= keep_prob[wid]:
                    continue
                ids.append(wid)
            if ids:
                sentences.append(ids)
    return sentences


def train_embeddings(corpus_path, config: EmbeddingConfig, progress=None) -> EmbeddingMatrix:
    """Train skip-gram negative-sampling vectors over the corpus.

    progress, when given, is called as progress(epoch, mean_pair_loss) after
    each epoch.  epochs=0 returns the seeded initialization unchanged.
    """
    vocab = build_vocabulary(corpus_path, config.min_count)
    matrix = init_matrix(vocab, config)
    if config.epochs == 0:
        return matrix
    sentences = _encode_corpus(corpus_path, vocab, config)
    if not sentences:
        return matrix
    flat = np.array([w for s in sentences for w in s], dtype=np.int32)
    offsets = np.zeros(len(sentences) + 1, dtype=np.int64)
    np.cumsum([len(s) for s in sentences], out=offsets[1:])
    table = build_negative_table(vocab.count_array(), config.table_size)
    total_words = int(flat.shape[0]) * config.epochs
    rng_state = Pcg32(config.seed, STREAM_EMB_TRAIN).state_array()
    words_done = 0
    for epoch in range(1, config.epochs + 1):
        loss_sum, pairs, words_done = backend.sgns_train_epoch(
            matrix.input_vectors, matrix.output_vectors, flat, offsets, table,
            config.window, config.negative_samples, rng_state,
            words_done, total_words, config.learning_rate, config.min_learning_rate,
        )
        if progress is not None:
            progress(epoch, loss_sum / max(pairs, 1))
    return matrix


def save_embeddings(matrix: EmbeddingMatrix, path, include_output: bool = True) -> None:
    """Write the binary embedding file (little-endian, magic WSDE)."""
    V, D = matrix.input_vectors.shape
    with open(path, "wb") as out:
        out.write(MAGIC)
        out.write(struct.pack("<I", FORMAT_VERSION))
        out.write(struct.pack("<QQ", V, D))
        for word in matrix.vocab.words:
            raw = word.encode("utf-8")
            out.write(struct.pack("<I", len(raw)))
            out.write(raw)
            out.write(struct.pack("<Q", matrix.vocab.counts[word]))
        out.write(np.ascontiguousarray(matrix.input_vectors, dtype="<f4").tobytes())
        out.write(struct.pack("<B", 1 if include_output else 0))
        if include_output:
            out.write(np.ascontiguousarray(matrix.output_vectors, dtype="<f4").tobytes())


def load_embeddings(path) -> EmbeddingMatrix:
    with open(path, "rb") as fh:
        magic = read_exact(fh, 4, "magic")
        if magic != MAGIC:
            raise FormatError("bad magic %r, expected %r" % (magic, MAGIC))
        (version,) = struct.unpack("<I", read_exact(fh, 4, "version"))
        if version != FORMAT_VERSION:
            raise FormatError("unsupported embedding format version %d" % version)
        V, D = struct.unpack("<QQ", read_exact(fh, 16, "dimensions"))
        words, counts = [], {}
        for _ in range(V):
            (nbytes,) = struct.unpack("<I", read_exact(fh, 4, "word length"))
            word = read_exact(fh, nbytes, "word bytes").decode("utf-8")
            (count,) = struct.unpack("<Q", read_exact(fh, 8, "word count"))
            words.append(word)
            counts[word] = count
        inp = np.frombuffer(read_exact(fh, V * D * 4, "input vectors"), dtype="<f4").reshape(V, D).copy()
        (flag,) = struct.unpack("<B", read_exact(fh, 1, "output flag"))
        if flag:
            out = np.frombuffer(read_exact(fh, V * D * 4, "output vectors"), dtype="<f4").reshape(V, D).copy()
        else:
            out = np.zeros((V, D), dtype=np.float32)
    min_count = min(counts.values()) if counts else 0
    vocab = Vocabulary(words=words, index={w: i for i, w in enumerate(words)}, counts=counts, min_count=min_count)
    return EmbeddingMatrix(vocab=vocab, input_vectors=inp, output_vectors=out)


def nearest_neighbors(matrix: EmbeddingMatrix, word: str, k: int):
    """Top-k cosine neighbors over the input vectors, query excluded."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if word not in matrix.vocab.index:
        raise KeyError("word %r not in vocabulary" % word)
    qi = matrix.vocab.index[word]
    vecs = matrix.input_vectors.astype(np.float64)
    q = vecs[qi]
    qnorm = np.linalg.norm(q)
    norms = np.linalg.norm(vecs, axis=1)
    denom = norms * qnorm
    with np.errstate(invalid="ignore", divide="ignore"):
        sims = np.where(denom > 0.0, vecs @ q / np.where(denom > 0.0, denom, 1.0), 0.0)
    order = sorted((i for i in range(len(vecs)) if i != qi), key=lambda i: (-sims[i], i))
    return [(matrix.vocab.words[i], float(sims[i])) for i in order[:k]]
