"""Column-format corpus ingestion, embeddings, splits and label statistics.

Dataset files hold one token per line with six TAB-separated columns::

    INDEX  TOKEN  HEAD  DEPREL  ASPECT  SENTIMENT

``ASPECT`` is one of B/I/O and ``SENTIMENT`` one of POS/NEG/NEU/NONE.
Sentences are separated by blank lines. A ``# id = ...`` comment line
before a sentence sets its id; otherwise ids are ``s<k>`` by position.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ASPECT_TAGS = ("O", "B", "I")
POLARITIES = ("POS", "NEG", "NEU")
SENTIMENT_TAGS = POLARITIES + ("NONE",)


class CorpusError(ValueError):
    """Malformed row or a sentence that violates the tagging invariants."""


@dataclass(frozen=True)
class Token:
    index: int
    surface: str
    head: int
    deprel: str
    aspect_tag: str
    sentiment_tag: str


@dataclass(frozen=True)
class Sentence:
    id: str
    tokens: tuple[Token, ...]

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def words(self) -> list[str]:
        return [t.surface for t in self.tokens]

    @property
    def aspect_tags(self) -> list[str]:
        return [t.aspect_tag for t in self.tokens]

    @property
    def sentiment_tags(self) -> list[str]:
        return [t.sentiment_tag for t in self.tokens]

    def aspect_spans(self) -> list[tuple[int, int, str]]:
        """Gold spans as ``(start, end, polarity)`` with 1-based inclusive bounds."""
        spans = []
        start = None
        for t in self.tokens:
            if t.aspect_tag == "B":
                if start is not None:
                    spans.append((start, t.index - 1, self.tokens[start - 1].sentiment_tag))
                start = t.index
            elif t.aspect_tag == "O" and start is not None:
                spans.append((start, t.index - 1, self.tokens[start - 1].sentiment_tag))
                start = None
        if start is not None:
            spans.append((start, len(self.tokens), self.tokens[start - 1].sentiment_tag))
        return spans


def validate_sentence(sent: Sentence) -> None:
    n = len(sent.tokens)
    where = f"sentence {sent.id!r}"
    if n == 0:
        raise CorpusError(f"{where}: empty sentence")
    prev = "O"
    for pos, t in enumerate(sent.tokens, start=1):
        if t.index != pos:
            raise CorpusError(f"{where}: token index {t.index} at position {pos}")
        if not 0 <= t.head <= n:
            raise CorpusError(f"{where}: head {t.head} of token {t.index} out of range 0..{n}")
        if t.head == t.index:
            raise CorpusError(f"{where}: token {t.index} is its own head")
        if t.aspect_tag not in ASPECT_TAGS:
            raise CorpusError(f"{where}: bad aspect tag {t.aspect_tag!r} on token {t.index}")
        if t.sentiment_tag not in SENTIMENT_TAGS:
            raise CorpusError(f"{where}: bad sentiment tag {t.sentiment_tag!r} on token {t.index}")
        if (t.aspect_tag == "O") != (t.sentiment_tag == "NONE"):
            raise CorpusError(
                f"{where}: inconsistent tags ({t.aspect_tag}, {t.sentiment_tag}) on token {t.index}")
        if t.aspect_tag == "I":
            if prev == "O":
                raise CorpusError(f"{where}: I tag on token {t.index} not preceded by B or I")
            if t.sentiment_tag != sent.tokens[pos - 2].sentiment_tag:
                raise CorpusError(f"{where}: mixed sentiment inside the span ending at token {t.index}")
        prev = t.aspect_tag


@dataclass
class Corpus:
    sentences: list[Sentence]
    vocabulary: dict[str, int] = field(default_factory=dict)
    sentiment_counts: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.vocabulary:
            self.vocabulary = build_vocabulary(self.sentences)
        if not self.sentiment_counts:
            self.sentiment_counts = count_sentiments(self.sentences)

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)


def build_vocabulary(sentences) -> dict[str, int]:
    vocab: dict[str, int] = {}
    for s in sentences:
        for t in s.tokens:
            vocab.setdefault(t.surface, len(vocab))
    return vocab


def count_sentiments(sentences) -> dict[str, int]:
    counts = Counter({p: 0 for p in POLARITIES})
    for s in sentences:
        for t in s.tokens:
            if t.sentiment_tag in POLARITIES:
                counts[t.sentiment_tag] += 1
    return dict(counts)


def parse_dataset(path) -> Corpus:
    path = Path(path)
    sentences: list[Sentence] = []
    rows: list[Token] = []
    sid = None

    def flush():
        nonlocal rows, sid
        if rows:
            sent = Sentence(sid or f"s{len(sentences) + 1}", tuple(rows))
            validate_sentence(sent)
            sentences.append(sent)
        rows, sid = [], None

    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                flush()
                continue
            if line.startswith("#"):
                key, _, value = line[1:].partition("=")
                if key.strip() == "id" and not rows:
                    sid = value.strip()
                continue
            cols = line.split("\t")
            if len(cols) != 6:
                raise CorpusError(f"{path}:{lineno}: expected 6 columns, got {len(cols)}")
            try:
                index, head = int(cols[0]), int(cols[2])
            except ValueError:
                raise CorpusError(f"{path}:{lineno}: non-integer index or head") from None
            rows.append(Token(index, cols[1], head, cols[3], cols[4], cols[5]))
    flush()
    return Corpus(sentences)


def serialize(corpus: Corpus) -> str:
    out = []
    for s in corpus.sentences:
        out.append(f"# id = {s.id}")
        for t in s.tokens:
            out.append("\t".join([str(t.index), t.surface, str(t.head), t.deprel,
                                  t.aspect_tag, t.sentiment_tag]))
        out.append("")
    return "\n".join(out)


def write_dataset(corpus: Corpus, path) -> None:
    Path(path).write_text(serialize(corpus), encoding="utf-8")


@dataclass
class EmbeddingTable:
    dimension: int
    vectors: np.ndarray  # (|V|, dimension), row = word id
    default_init: float = 0.1

    def __post_init__(self):
        if self.vectors.shape[1] != self.dimension:
            raise ValueError("embedding rows must match the table dimension")


def random_embeddings(vocab: dict[str, int], dim: int, seed: int = 0, spread: float = 0.1) -> EmbeddingTable:
    rng = np.random.default_rng(seed)
    return EmbeddingTable(dim, rng.uniform(-spread, spread, size=(len(vocab), dim)), spread)


def load_embeddings(path, vocab: dict[str, int], dim: int, seed: int = 0) -> EmbeddingTable:
    """Read ``word v1 ... v_dim`` rows; words missing from the file get seeded U(-0.1, 0.1)."""
    if dim <= 0:
        raise ValueError("embedding dimension must be positive")
    table = random_embeddings(vocab, dim, seed)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            word, vals = parts[0], parts[1:]
            if len(vals) != dim:
                raise ValueError(f"{path}:{lineno}: vector for {word!r} has {len(vals)} values, expected {dim}")
            if word in vocab:
                table.vectors[vocab[word]] = [float(v) for v in vals]
    return table


def concat_embeddings(*tables: EmbeddingTable) -> EmbeddingTable:
    vectors = np.concatenate([t.vectors for t in tables], axis=1)
    return EmbeddingTable(vectors.shape[1], vectors, tables[0].default_init)


def split_train_dev(corpus: Corpus, dev_fraction: float = 0.2, seed: int = 0) -> tuple[Corpus, Corpus]:
    if not 0.0 < dev_fraction < 1.0:
        raise ValueError(f"dev_fraction must be in (0, 1), got {dev_fraction}")
    n = len(corpus.sentences)
    if n < 2:
        raise ValueError("need at least two sentences to split")
    n_dev = min(max(int(round(dev_fraction * n)), 1), n - 1)
    perm = np.random.default_rng(seed).permutation(n)
    dev_idx = set(perm[:n_dev].tolist())
    train = [s for i, s in enumerate(corpus.sentences) if i not in dev_idx]
    dev = [s for i, s in enumerate(corpus.sentences) if i in dev_idx]
    return Corpus(train), Corpus(dev)


def sentiment_distribution(corpus: Corpus) -> tuple[float, float, float]:
    counts = [corpus.sentiment_counts.get(p, 0) for p in POLARITIES]
    total = sum(counts)
    if total == 0:
        raise ValueError("corpus has no aspect tokens")
    return tuple(c / total for c in counts)


def corpus_stats(corpus: Corpus) -> dict[str, int]:
    """Aspect and polarity counts in the layout of the usual dataset table.

    Aspect counts are spans (entities), polarity counts are per span.
    """
    spans = [sp for s in corpus.sentences for sp in s.aspect_spans()]
    pol = Counter(p for _, _, p in spans)
    return {
        "sentences": len(corpus.sentences),
        "tokens": sum(len(s) for s in corpus.sentences),
        "aspects": len(spans),
        "POS": pol["POS"],
        "NEG": pol["NEG"],
        "NEU": pol["NEU"],
        "multi": sum(1 for s in corpus.sentences if len(s.aspect_spans()) >= 2),
        "noop": sum(1 for s in corpus.sentences if not s.aspect_spans()),
    }

