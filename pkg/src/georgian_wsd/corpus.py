"""Corpus filtering, homonym window extraction and dataset handling.

The pipeline goes: raw web-corpus lines -> Georgian-only cleaned lines ->
sentence segmentation and tokenization -> windows of at most 13 tokens
centered on an occurrence of the homonym.  Labeled datasets reuse the same
window records plus a sense label per line.
"""

import math
import unicodedata
from dataclasses import dataclass

from .rng import Pcg32, STREAM_ABLATION, STREAM_SPLIT

GEORGIAN_LO = 0x10D0  # Mkhedruli block only; older scripts deliberately out
GEORGIAN_HI = 0x10FF

WINDOW_MAX_TOKENS = 13
CONTEXT_RADIUS = 6  # 6 left + target + 6 right = 13

SENTENCE_TERMINATORS = frozenset({".", "!", "?", "…"})

DATASET_HEADER = "#wsd-v1"

# sense label for hand-labeled examples outside the configured inventory;
# stored as "-" in dataset files and dropped before classifier training
OTHER = -1


def is_georgian_char(ch: str) -> bool:
    return GEORGIAN_LO <= ord(ch) <= GEORGIAN_HI


def is_georgian_word(word: str) -> bool:
    return bool(word) and all(is_georgian_char(c) for c in word)


def _strip_edges(word: str, digits: bool) -> str:
    """Strip leading/trailing punctuation (Unicode P*) and optionally digits."""

    def strippable(ch):
        return unicodedata.category(ch).startswith("P") or (digits and ch.isdigit())

    start, end = 0, len(word)
    while start < end and strippable(word[start]):
        start += 1
    while end > start and strippable(word[end - 1]):
        end -= 1
    return word[start:end]


def filter_georgian_line(line: str) -> str | None:
    """Keep a line only if every word is purely Georgian.

    A word passes when, after stripping edge punctuation and digits, it is
    non-empty and consists solely of Mkhedruli letters.  Returns the line
    with surrounding whitespace trimmed, or None if any word fails (or the
    line is empty).  Idempotent on its own output.
    """
    stripped = line.strip()
    if not stripped:
        return None
    for word in stripped.split():
        core = _strip_edges(word, digits=True)
        if not is_georgian_word(core):
            return None
    return stripped


def segment_and_tokenize(text: str, terminators=SENTENCE_TERMINATORS) -> list[list[str]]:
    """Split cleaned text into sentences of normalized tokens.

    Sentences break on any terminator character; tokens split on whitespace
    and lose edge punctuation/digits.  Empty tokens and sentences are dropped.
    """
    sentences = []
    current = []
    for ch in text:
        if ch in terminators:
            if current:
                sentences.append("".join(current))
                current = []
        else:
            current.append(ch)
    if current:
        sentences.append("".join(current))

    out = []
    for sent in sentences:
        tokens = [_strip_edges(w, digits=True) for w in sent.split()]
        tokens = [t for t in tokens if t]
        if tokens:
            out.append(tokens)
    return out


@dataclass(frozen=True)
class HomonymSpec:
    """The homonym under study: its surface forms and sense inventory."""

    lemma: str
    surface_forms: tuple
    # ordered (sense_id, gloss, synonym_base_form)
    sense_inventory: tuple

    def __post_init__(self):
        if not self.surface_forms:
            raise ValueError("homonym spec needs at least one surface form")
        if self.lemma not in self.surface_forms:
            raise ValueError("lemma %r missing from surface forms" % self.lemma)
        ids = [sid for sid, _, _ in self.sense_inventory]
        if ids != list(range(len(ids))):
            raise ValueError("sense ids must be contiguous 0..K-1, got %r" % ids)
        synonyms = [syn for _, _, syn in self.sense_inventory]
        if len(set(synonyms)) != len(synonyms):
            raise ValueError("sense synonyms must be distinct, got %r" % synonyms)

    @property
    def n_senses(self) -> int:
        return len(self.sense_inventory)

    def gloss(self, sense_id: int) -> str:
        return self.sense_inventory[sense_id][1]

    def synonym(self, sense_id: int) -> str:
        return self.sense_inventory[sense_id][2]


def parse_homonym_spec(text: str) -> HomonymSpec:
    """Parse the key-value homonym config format.

    Lines: ``lemma <word>``, ``form <word>`` (repeated) and
    ``sense <id> <gloss> <synonym>`` (repeated).  '#' starts a comment.
    """
    lemma = None
    forms = []
    senses = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        key = parts[0]
        if key == "lemma" and len(parts) == 2:
            lemma = parts[1]
        elif key == "form" and len(parts) == 2:
            forms.append(parts[1])
        elif key == "sense" and len(parts) == 4:
            try:
                sid = int(parts[1])
            except ValueError:
                raise ValueError("line %d: sense id %r is not an integer" % (lineno, parts[1]))
            senses.append((sid, parts[2], parts[3]))
        else:
            raise ValueError("line %d: cannot parse %r" % (lineno, raw))
    if lemma is None:
        raise ValueError("homonym spec has no lemma line")
    senses.sort(key=lambda s: s[0])
    return HomonymSpec(lemma=lemma, surface_forms=tuple(forms), sense_inventory=tuple(senses))


def load_homonym_spec(path) -> HomonymSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_homonym_spec(fh.read())


@dataclass(frozen=True)
class SentenceWindow:
    """Up to 13 tokens around one homonym occurrence."""

    tokens: tuple
    target_index: int
    source_id: str = ""

    def __post_init__(self):
        if not 1 <= len(self.tokens) <= WINDOW_MAX_TOKENS:
            raise ValueError("window must hold 1..%d tokens, got %d" % (WINDOW_MAX_TOKENS, len(self.tokens)))
        if not 0 <= self.target_index < len(self.tokens):
            raise ValueError("target index %d outside window of %d tokens" % (self.target_index, len(self.tokens)))


@dataclass(frozen=True)
class LabeledExample:
    window: SentenceWindow
    label: int  # sense id, or OTHER


def extract_windows(sentence: list, spec: HomonymSpec, radius: int = CONTEXT_RADIUS) -> list:
    """One window per occurrence of any surface form, centered when possible.

    The window spans up to `radius` tokens each side of the occurrence and
    truncates at sentence boundaries; occurrences are never deduplicated.
    """
    forms = set(spec.surface_forms)
    windows = []
    for pos, token in enumerate(sentence):
        if token in forms:
            lo = max(0, pos - radius)
            hi = min(len(sentence), pos + radius + 1)
            windows.append(SentenceWindow(tokens=tuple(sentence[lo:hi]), target_index=pos - lo))
    return windows


def format_dataset_record(window: SentenceWindow, label: int | None = None) -> str:
    lab = "-" if label is None or label == OTHER else str(label)
    return "%s\t%d\t%s" % (lab, window.target_index, " ".join(window.tokens))


def run_extraction_pipeline(input_paths, spec: HomonymSpec, output_path) -> int:
    """Stream raw corpus files into a window dataset file.

    Lines flow through filter_georgian_line, segmentation and window
    extraction; output order follows input order.  Returns the window count.
    """
    count = 0
    with open(output_path, "w", encoding="utf-8") as out:
        out.write(DATASET_HEADER + "\n")
        for path in input_paths:
            try:
                fh = open(path, encoding="utf-8")
            except OSError as exc:
                raise OSError("cannot read corpus file %s: %s" % (path, exc)) from exc
            with fh:
                for lineno, line in enumerate(fh, 1):
                    cleaned = filter_georgian_line(line)
                    if cleaned is None:
                        continue
                    for sentence in segment_and_tokenize(cleaned):
                        for window in extract_windows(sentence, spec):
                            out.write(format_dataset_record(window) + "\n")
                            count += 1
    return count


def _parse_record(line: str, lineno: int, spec: HomonymSpec) -> LabeledExample:
    fields = line.split("\t")
    if len(fields) != 3:
        raise ValueError("line %d: expected 3 tab-separated fields, got %d" % (lineno, len(fields)))
    raw_label, raw_index, raw_tokens = fields
    if raw_label == "-":
        label = OTHER
    else:
        try:
            label = int(raw_label)
        except ValueError:
            raise ValueError("line %d: label field %r is not an integer" % (lineno, raw_label))
        if not 0 <= label < spec.n_senses:
            raise ValueError("line %d: label %d outside senses 0..%d" % (lineno, label, spec.n_senses - 1))
    try:
        target_index = int(raw_index)
    except ValueError:
        raise ValueError("line %d: target_index field %r is not an integer" % (lineno, raw_index))
    tokens = tuple(t for t in raw_tokens.split(" ") if t)
    if not tokens:
        raise ValueError("line %d: tokens field is empty" % lineno)
    if len(tokens) > WINDOW_MAX_TOKENS:
        raise ValueError("line %d: window has %d tokens, maximum is %d" % (lineno, len(tokens), WINDOW_MAX_TOKENS))
    if not 0 <= target_index < len(tokens):
        raise ValueError("line %d: target_index %d outside window of %d tokens" % (lineno, target_index, len(tokens)))
    if tokens[target_index] not in spec.surface_forms:
        raise ValueError(
            "line %d: target token %r is not a surface form of %r" % (lineno, tokens[target_index], spec.lemma)
        )
    window = SentenceWindow(tokens=tokens, target_index=target_index, source_id="line %d" % lineno)
    return LabeledExample(window=window, label=label)


def load_labeled_dataset(path, spec: HomonymSpec) -> list:
    """Load a window dataset file, validating every record."""
    examples = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != DATASET_HEADER:
            raise ValueError("%s: missing %r header line (got %r)" % (path, DATASET_HEADER, header))
        for lineno, line in enumerate(fh, 2):
            line = line.rstrip("\n")
            if not line:
                continue
            examples.append(_parse_record(line, lineno, spec))
    return examples


def save_labeled_dataset(examples, path) -> None:
    with open(path, "w", encoding="utf-8") as out:
        out.write(DATASET_HEADER + "\n")
        for ex in examples:
            out.write(format_dataset_record(ex.window, ex.label) + "\n")


def drop_other(examples) -> list:
    return [ex for ex in examples if ex.label != OTHER]


@dataclass(frozen=True)
class SplitSpec:
    seed: int
    test_fraction: float = 0.2
    validation_fraction_of_train: float = 0.2
    stratified: bool = True

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must lie in (0,1)")
        if not 0.0 <= self.validation_fraction_of_train < 1.0:
            raise ValueError("validation_fraction_of_train must lie in [0,1)")


def _round_half_up(x: float) -> int:
    # ties go to the smaller part (test/validation), which is the one being sized
    return int(math.floor(x + 0.5))


def stratified_split(examples, split: SplitSpec, n_classes: int | None = None):
    """Deterministic (train, validation, test) partition preserving class ratios.

    Within each class the order is shuffled by a generator seeded from
    split.seed; test then validation sizes are rounded to nearest with ties
    toward the carved-out part.  When n_classes is given, every class
    0..n_classes-1 must be present.
    """
    rng = Pcg32(split.seed, STREAM_SPLIT)
    by_class = {}
    for ex in examples:
        by_class.setdefault(ex.label, []).append(ex)
    if n_classes is not None:
        for label in range(n_classes):
            if not by_class.get(label):
                raise ValueError("class %d has no examples after filtering" % label)
    if split.stratified:
        groups = [by_class[label] for label in sorted(by_class)]
    else:
        groups = [list(examples)]

    train, validation, test = [], [], []
    for group in groups:
        group = list(group)
        rng.shuffle(group)
        n_test = _round_half_up(len(group) * split.test_fraction)
        test.extend(group[:n_test])
        rest = group[n_test:]
        n_val = _round_half_up(len(rest) * split.validation_fraction_of_train)
        validation.extend(rest[:n_val])
        train.extend(rest[n_val:])
    return train, validation, test


def stratified_subsample(examples, fraction: float, seed: int):
    """Seeded per-class subsample used by the training-size ablation."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must lie in (0,1], got %r" % fraction)
    if fraction == 1.0:
        return list(examples)
    rng = Pcg32(seed, STREAM_ABLATION)
    by_class = {}
    for ex in examples:
        by_class.setdefault(ex.label, []).append(ex)
    picked = []
    for label in sorted(by_class):
        group = list(by_class[label])
        n = _round_half_up(len(group) * fraction)
        if n == 0:
            raise ValueError("fraction %g empties class %r" % (fraction, label))
        rng.shuffle(group)
        picked.extend(group[:n])
    return picked
