"""Heterogeneous sentence graph: word nodes, three sentiment nodes, four edge types.

Node numbering inside a graph: word ``i`` (1-based) is node ``i - 1`` and
sentiment ``s`` (0=POS, 1=NEG, 2=NEU) is node ``n_words + s``.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .corpus import POLARITIES, Corpus, Sentence

N_SENTI = 3


class EdgeType(IntEnum):
    TO = 0
    FROM = 1
    POSITION = 2
    SENTIMENT = 3


class GraphError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class NodeId:
    kind: str  # "word" | "senti"
    index: int

    @classmethod
    def word(cls, i: int) -> "NodeId":
        return cls("word", i)

    @classmethod
    def senti(cls, s: int) -> "NodeId":
        return cls("senti", s)

    def __str__(self) -> str:
        return f"w{self.index}" if self.kind == "word" else POLARITIES[self.index]


@dataclass
class HeteroGraph:
    n_words: int
    edges: dict[EdgeType, set[tuple[int, int]]] = field(
        default_factory=lambda: {t: set() for t in EdgeType})
    # keyed by (word node, senti node)
    sentiment_edge_conf: dict[tuple[int, int], float] = field(default_factory=dict)

    @property
    def n_nodes(self) -> int:
        return self.n_words + N_SENTI

    def node(self, nid: NodeId) -> int:
        if nid.kind == "word":
            if not 1 <= nid.index <= self.n_words:
                raise GraphError(f"word index {nid.index} outside 1..{self.n_words}")
            return nid.index - 1
        if nid.kind == "senti":
            if not 0 <= nid.index < N_SENTI:
                raise GraphError(f"sentiment index {nid.index} outside 0..2")
            return self.n_words + nid.index
        raise GraphError(f"unknown node kind {nid.kind!r}")

    def node_id(self, k: int) -> NodeId:
        return NodeId.word(k + 1) if k < self.n_words else NodeId.senti(k - self.n_words)

    def is_word(self, k: int) -> bool:
        return 0 <= k < self.n_words

    def copy(self) -> "HeteroGraph":
        return HeteroGraph(self.n_words, {t: set(e) for t, e in self.edges.items()},
                           dict(self.sentiment_edge_conf))

    def neighbors(self, k: int, etype: EdgeType) -> list[int]:
        """Nodes sending a message to ``k`` along ``etype`` (edge ``j -> k``)."""
        return sorted(j for j, dst in self.edges[etype] if dst == k)

    def sentiment_degree(self, s: int) -> int:
        snode = self.n_words + s
        return sum(1 for (_w, t) in self.sentiment_edge_conf if t == snode)

    def adjacency(self, etype: EdgeType) -> np.ndarray:
        """Row-normalised incoming adjacency: ``A[k, j] = 1/indeg(k)`` for ``j -> k``."""
        a = np.zeros((self.n_nodes, self.n_nodes))
        for j, k in self.edges[etype]:
            a[k, j] = 1.0
        deg = a.sum(axis=1, keepdims=True)
        np.divide(a, deg, out=a, where=deg > 0)
        return a

    def audit(self) -> None:
        """Raise if any structural invariant is broken."""
        to, frm = self.edges[EdgeType.TO], self.edges[EdgeType.FROM]
        if {(b, a) for a, b in to} != frm:
            raise GraphError("To is not the transpose of From")
        for t in EdgeType:
            for a, b in self.edges[t]:
                if a == b:
                    raise GraphError(f"self-loop on node {a} ({t.name})")
                word_pair = self.is_word(a) and self.is_word(b)
                if t is EdgeType.SENTIMENT:
                    if self.is_word(a) == self.is_word(b):
                        raise GraphError(f"sentiment edge {a}->{b} is not word-sentiment")
                elif not word_pair:
                    raise GraphError(f"{t.name} edge {a}->{b} touches a sentiment node")
        for t in (EdgeType.POSITION, EdgeType.SENTIMENT):
            if any((b, a) not in self.edges[t] for a, b in self.edges[t]):
                raise GraphError(f"{t.name} edges are not symmetric")
        logical = {(a, b) if self.is_word(a) else (b, a) for a, b in self.edges[EdgeType.SENTIMENT]}
        if logical != set(self.sentiment_edge_conf):
            raise GraphError("sentiment confidences out of sync with sentiment edges")

    def dump(self) -> list[str]:
        """``EDGE <type> <src> <dst> [conf]`` lines sorted by (type, src, dst)."""
        lines = []
        for t in EdgeType:
            for a, b in sorted(self.edges[t]):
                line = f"EDGE {t.name.lower()} {self.node_id(a)} {self.node_id(b)}"
                if t is EdgeType.SENTIMENT:
                    key = (a, b) if self.is_word(a) else (b, a)
                    line += f" {self.sentiment_edge_conf[key]:.6f}"
                lines.append(line)
        return lines


def init_graph(sentence: Sentence, window: int = 3) -> HeteroGraph:
    if window < 0:
        raise ValueError("window must be non-negative")
    n = len(sentence)
    g = HeteroGraph(n)
    for t in sentence.tokens:
        if t.head > 0:
            g.edges[EdgeType.TO].add((t.head - 1, t.index - 1))
            g.edges[EdgeType.FROM].add((t.index - 1, t.head - 1))
    for i in range(n):
        for j in range(max(0, i - window), min(n, i + window + 1)):
            if i != j:
                g.edges[EdgeType.POSITION].add((i, j))
    return g


@dataclass
class PmiStats:
    """Sentence-level document frequencies for positive-PMI co-occurrence edges."""

    n_sentences: int
    word_df: dict[str, int]
    pair_df: dict[tuple[str, str], int]

    @classmethod
    def from_corpus(cls, corpus: Corpus) -> "PmiStats":
        word_df: Counter = Counter()
        pair_df: Counter = Counter()
        for s in corpus.sentences:
            types = sorted(set(s.words))
            word_df.update(types)
            for i, a in enumerate(types):
                for b in types[i + 1:]:
                    pair_df[(a, b)] += 1
        return cls(len(corpus.sentences), dict(word_df), dict(pair_df))

    def pmi(self, a: str, b: str) -> float:
        key = (a, b) if a < b else (b, a)
        joint = self.pair_df.get(key, 0)
        if joint == 0 or a == b:
            return -math.inf
        n = self.n_sentences
        return math.log((joint / n) / ((self.word_df[a] / n) * (self.word_df[b] / n)))

    def to_json(self) -> dict:
        return {"n": self.n_sentences, "words": self.word_df,
                "pairs": [[a, b, c] for (a, b), c in sorted(self.pair_df.items())]}

    @classmethod
    def from_json(cls, d: dict) -> "PmiStats":
        return cls(d["n"], dict(d["words"]), {(a, b): c for a, b, c in d["pairs"]})


def pmi_edges(stats: PmiStats | Corpus, sentence: Sentence) -> set[tuple[int, int]]:
    """Word-word node pairs (both directions) whose surfaces have PMI > 0."""
    if isinstance(stats, Corpus):
        stats = PmiStats.from_corpus(stats)
    words = sentence.words
    out = set()
    for i in range(len(words)):
        for j in range(i + 1, len(words)):
            if stats.pmi(words[i], words[j]) > 0:
                out.add((i, j))
                out.add((j, i))
    return out


def init_graph_pmi(sentence: Sentence, stats: PmiStats, window: int = 3) -> HeteroGraph:
    """Ablation graph: syntactic edges replaced by positive-PMI edges, positions kept."""
    g = init_graph(sentence, window)
    co = pmi_edges(stats, sentence)
    g.edges[EdgeType.TO] = set(co)
    g.edges[EdgeType.FROM] = set(co)
    return g


def add_sentiment_edge(graph: HeteroGraph, word: NodeId, senti: NodeId, conf: float) -> None:
    if word.kind != "word" or senti.kind != "senti":
        raise GraphError(f"sentiment edge needs (word, senti) nodes, got ({word}, {senti})")
    if not 0.0 < conf <= 1.0:
        raise GraphError(f"confidence {conf} outside (0, 1]")
    w, s = graph.node(word), graph.node(senti)
    key = (w, s)
    graph.sentiment_edge_conf[key] = max(conf, graph.sentiment_edge_conf.get(key, 0.0))
    graph.edges[EdgeType.SENTIMENT].add((w, s))
    graph.edges[EdgeType.SENTIMENT].add((s, w))


def sentiment_budgets(train_dist, total_edges: int) -> list[int]:
    return [math.ceil(train_dist[s] * total_edges) for s in range(N_SENTI)]


def drop_sentiment_edges(graph: HeteroGraph, train_dist) -> list[tuple[int, int]]:
    """Trim each sentiment node to ``ceil(dist[s] * E)`` edges, keeping the most confident.

    ``E`` is the number of word-sentiment edges before dropping. Ties go to the
    lower word index. Returns the dropped ``(word index, sentiment)`` pairs.
    """
    total = len(graph.sentiment_edge_conf)
    if total == 0:
        return []
    budgets = sentiment_budgets(train_dist, total)
    dropped = []
    for s in range(N_SENTI):
        snode = graph.n_words + s
        linked = [(w, c) for (w, t), c in graph.sentiment_edge_conf.items() if t == snode]
        if len(linked) <= budgets[s]:
            continue
        linked.sort(key=lambda wc: (-wc[1], wc[0]))
        for w, _c in linked[budgets[s]:]:
            del graph.sentiment_edge_conf[(w, snode)]
            graph.edges[EdgeType.SENTIMENT].discard((w, snode))
            graph.edges[EdgeType.SENTIMENT].discard((snode, w))
            dropped.append((w + 1, s))
    dropped.sort()
    return dropped
