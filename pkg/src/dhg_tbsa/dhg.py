"""Iterative predict-and-relink loop over the heterogeneous graph.

Each iteration re-encodes the current graph with the AE and AS stacks,
scores every word against the three sentiment nodes, links confident
(word, sentiment) pairs, then trims sentiment-node degrees back to the
training label distribution. Edge structure is discrete: gradients flow
through hidden states, never through the choice of edges.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .corpus import POLARITIES, Sentence
from .graph import EdgeType, HeteroGraph, NodeId, add_sentiment_edge, drop_sentiment_edges
from .model import HGGNNModel, adjacency_stack, as_sim_logits, run_stack, word_rows
from .numcore import Tape, Tensor, _softmax_rows


@dataclass
class DhgConfig:
    times: int = 2
    epsilon: float = 0.75
    mu: float = 10.0
    tf_keep: float = 0.2

    def __post_init__(self):
        if self.times < 1:
            raise ValueError("times must be >= 1")
        if not 0.0 < self.epsilon <= 1.0:
            raise ValueError("epsilon must be in (0, 1]")
        if self.mu <= 0:
            raise ValueError("mu must be positive")
        if not 0.0 < self.tf_keep <= 1.0:
            raise ValueError("tf_keep must be in (0, 1]")


def teacher_forcing_gap(epoch: int, mu: float = 10.0) -> float:
    """``1 - teacher_forcing_prob``, kept separate because it stays resolvable
    in floating point long after the probability itself has rounded to 1."""
    if mu <= 0:
        raise ValueError("mu must be positive")
    if epoch < 0:
        raise ValueError("epoch must be non-negative")
    e = epoch / mu
    if e > 700:  # mu / (mu + exp(e)) == mu * exp(-e) to double precision here
        return mu * math.exp(-e)
    return mu / (mu + math.exp(e))


def teacher_forcing_prob(epoch: int, mu: float = 10.0) -> float:
    """Probability of building edges from predictions rather than gold labels."""
    return 1.0 - teacher_forcing_gap(epoch, mu)


def teacher_edges(sentence: Sentence, tf_keep: float, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Gold (word index, polarity index) pairs, each kept with probability ``tf_keep``."""
    if not 0.0 < tf_keep <= 1.0:
        raise ValueError("tf_keep must be in (0, 1]")
    out = []
    for t in sentence.tokens:
        if t.sentiment_tag in POLARITIES:
            if tf_keep >= 1.0 or rng.random() < tf_keep:
                out.append((t.index, POLARITIES.index(t.sentiment_tag)))
    return out


@dataclass
class IterationRecord:
    iteration: int
    probs: np.ndarray  # (n_words, 3) similarity-head distribution
    added: list[tuple[int, int, float, bool]] = field(default_factory=list)  # word, senti, conf, forced
    dropped: list[tuple[int, int]] = field(default_factory=list)
    m_checksum: float = 0.0
    n_checksum: float = 0.0


@dataclass
class DhgResult:
    m: Tensor  # AE hidden states after the last iteration (all nodes)
    n: Tensor  # AS hidden states after the last iteration (all nodes)
    trace: list[IterationRecord]
    graph: HeteroGraph
    teacher_forced: bool = False


def run_dhg(tape: Tape, model: HGGNNModel, sentence: Sentence, graph0: HeteroGraph, cfg: DhgConfig,
            train_dist, *, train: bool = False, epoch: int = 0, rng: np.random.Generator | None = None,
            pred_prob: float | None = None,
            edit_hook: Callable[[int, HeteroGraph], None] | None = None) -> DhgResult:
    """Run the shared stack once, then ``cfg.times`` rounds of AE/AS encoding and relinking.

    In train mode one coin flip per call decides between predicted edges
    (probability ``pred_prob``, by default the epoch schedule) and gold edges
    subsampled to ``cfg.tf_keep``. ``edit_hook(l, graph)`` runs after round
    ``l`` has modified the graph; tests use it to probe the dependency structure.
    """
    if graph0.edges[EdgeType.SENTIMENT]:
        raise ValueError("initial graph must not carry sentiment edges")
    if train and rng is None:
        raise ValueError("train mode needs an rng")
    rate = model.cfg.dropout if train else 0.0
    n_words = graph0.n_words
    x = model.node_inputs(tape, sentence)
    graph = graph0.copy()
    adj = adjacency_stack(graph)
    shared = run_stack(tape, model.stack("shared"), x, x, adj, rate, train, rng)

    use_teacher = False
    if train:
        p_pred = teacher_forcing_prob(epoch, cfg.mu) if pred_prob is None else pred_prob
        use_teacher = bool(rng.random() >= p_pred)

    m = n = shared
    trace = []
    for it in range(1, cfg.times + 1):
        m = run_stack(tape, model.stack("ae"), x, m, adj, rate, train, rng)
        n = run_stack(tape, model.stack("as"), x, n, adj, rate, train, rng)
        logits = as_sim_logits(tape, word_rows(tape, n, n_words), model.params["senti"])
        probs = _softmax_rows(logits.value)
        rec = IterationRecord(it, probs, m_checksum=float(m.value.sum()), n_checksum=float(n.value.sum()))
        if use_teacher:
            for w, s in teacher_edges(sentence, cfg.tf_keep, rng):
                add_sentiment_edge(graph, NodeId.word(w), NodeId.senti(s), 1.0)
                rec.added.append((w, s, 1.0, True))
        else:
            for i, s in zip(*np.nonzero(probs > cfg.epsilon)):
                conf = float(probs[i, s])
                add_sentiment_edge(graph, NodeId.word(int(i) + 1), NodeId.senti(int(s)), conf)
                rec.added.append((int(i) + 1, int(s), conf, False))
        rec.dropped = drop_sentiment_edges(graph, train_dist)
        if edit_hook is not None:
            edit_hook(it, graph)
        trace.append(rec)
        if it < cfg.times:
            adj = adjacency_stack(graph)
    return DhgResult(m, n, trace, graph, use_teacher)


def static_pass(tape: Tape, model: HGGNNModel, sentence: Sentence, graph0: HeteroGraph) -> tuple[Tensor, Tensor]:
    """Shared stack then one AE and one AS pass on the unmodified graph (eval mode)."""
    x = model.node_inputs(tape, sentence)
    adj = adjacency_stack(graph0)
    shared = run_stack(tape, model.stack("shared"), x, x, adj)
    m = run_stack(tape, model.stack("ae"), x, shared, adj)
    n = run_stack(tape, model.stack("as"), x, shared, adj)
    return m, n


def dump_trace(trace: list[IterationRecord]) -> list[str]:
    lines = []
    for rec in trace:
        for w, s, conf, forced in sorted(rec.added):
            lines.append(f"ITER {rec.iteration} ADD w{w}→{POLARITIES[s]} {conf:.6f}" + (" forced" if forced else ""))
        for w, s in sorted(rec.dropped):
            lines.append(f"ITER {rec.iteration} DROP w{w}→{POLARITIES[s]}")
    return lines


def render_links(sentence: Sentence, trace: list[IterationRecord]) -> str:
    """Sentence with each word's surviving links per round, e.g. ``like[1:POS,2:POS]``."""
    links: dict[int, list[str]] = {}
    for rec in trace:
        dropped = set(rec.dropped)
        for w, s, _conf, _forced in sorted(rec.added):
            if (w, s) not in dropped:
                links.setdefault(w, []).append(f"{rec.iteration}:{POLARITIES[s]}")
    return " ".join(t.surface + (f"[{','.join(links[t.index])}]" if t.index in links else "")
                    for t in sentence.tokens)
