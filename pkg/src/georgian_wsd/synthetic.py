"""Synthetic disambiguation tasks for tests and benchmarks.

Windows carry class-indicative marker tokens around a fake homonym, written
in Mkhedruli letters so they satisfy the same validation as real data.
Label noise, when requested, flips a fraction of labels to a wrong class.
"""

import numpy as np

from .corpus import HomonymSpec, LabeledExample, SentenceWindow
from .embeddings import EmbeddingMatrix, Vocabulary
from .rng import Pcg32, STREAM_SYNTH

_LETTERS = [chr(0x10D0 + i) for i in range(32)]

HOMONYM = "ბარი"  # "bari"


def synthetic_homonym_spec() -> HomonymSpec:
    return HomonymSpec(
        lemma=HOMONYM,
        surface_forms=(HOMONYM,),
        sense_inventory=(
            (0, "shovel", "ნიჩაბი"),
            (1, "lowland", "დაბლობი"),
            (2, "cafe", "კაფე"),
        ),
    )


def _word(n: int) -> str:
    """Distinct 3-letter Georgian token for id n."""
    return _LETTERS[(n >> 10) & 31] + _LETTERS[(n >> 5) & 31] + _LETTERS[n & 31]


def marker_words(n_classes: int = 3, per_class: int = 20) -> list:
    return [[_word(c * per_class + m) for m in range(per_class)] for c in range(n_classes)]


def filler_words(n_fillers: int = 100, n_classes: int = 3, per_class: int = 20) -> list:
    base = n_classes * per_class
    return [_word(base + i) for i in range(n_fillers)]


def make_dataset(n_windows: int, seed: int = 42, n_classes: int = 3, per_class_markers: int = 20,
                 n_fillers: int = 100, marker_prob: float = 0.5, window_len: int = 13) -> list:
    """Full-length windows whose context markers reveal the label."""
    rng = Pcg32(seed, STREAM_SYNTH)
    markers = marker_words(n_classes, per_class_markers)
    fillers = filler_words(n_fillers, n_classes, per_class_markers)
    target = window_len // 2
    examples = []
    for _ in range(n_windows):
        label = rng.randint(n_classes)
        tokens = []
        for _ in range(window_len - 1):
            if rng.next_f64() < marker_prob:
                tokens.append(markers[label][rng.randint(per_class_markers)])
            else:
                tokens.append(fillers[rng.randint(n_fillers)])
        tokens.insert(target, HOMONYM)
        examples.append(LabeledExample(
            window=SentenceWindow(tokens=tuple(tokens), target_index=target), label=label))
    return examples


def flip_labels(examples, fraction: float, seed: int, n_classes: int = 3) -> list:
    """Replace ~fraction of labels with a uniformly chosen wrong class."""
    rng = Pcg32(seed, STREAM_SYNTH + 1)
    noisy = []
    for ex in examples:
        if rng.next_f64() < fraction:
            wrong = (ex.label + 1 + rng.randint(n_classes - 1)) % n_classes
            noisy.append(LabeledExample(window=ex.window, label=wrong))
        else:
            noisy.append(ex)
    return noisy


def write_corpus(examples, path) -> None:
    """Window token sequences as an embedding-training corpus, one per line."""
    with open(path, "w", encoding="utf-8") as out:
        for ex in examples:
            out.write(" ".join(ex.window.tokens) + "\n")


def make_marker_embedding_matrix(dimension: int = 32, n_classes: int = 3, per_class: int = 20,
                                 n_fillers: int = 100) -> EmbeddingMatrix:
    """Hand-built embeddings with disjoint per-class subspaces.

    Markers of class c occupy coordinate block c, fillers and the homonym a
    shared trailing block, so the classes are linearly separable by
    construction without any embedding training.
    """
    markers = marker_words(n_classes, per_class)
    fillers = filler_words(n_fillers, n_classes, per_class)
    words = [HOMONYM] + [w for group in markers for w in group] + fillers
    counts = {w: 100 for w in words}
    vocab = Vocabulary(words=words, index={w: i for i, w in enumerate(words)},
                       counts=counts, min_count=1)
    block = dimension // (n_classes + 1)
    vecs = np.zeros((len(words), dimension), dtype=np.float32)
    for c, group in enumerate(markers):
        for j, w in enumerate(group):
            vecs[vocab.index[w], c * block + j % block] = 1.0
    shared = n_classes * block
    for j, w in enumerate([HOMONYM] + fillers):
        vecs[vocab.index[w], shared + j % (dimension - shared)] = 1.0
    return EmbeddingMatrix(vocab=vocab, input_vectors=vecs,
                           output_vectors=np.zeros_like(vecs))
