"""From model outputs to aspect spans with polarities."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpus import ASPECT_TAGS, POLARITIES, Sentence
from .dhg import DhgConfig, DhgResult, IterationRecord, run_dhg
from .graph import HeteroGraph, PmiStats, init_graph, init_graph_pmi
from .model import (HGGNNModel, as_mlp_logits, as_sim_logits, crf_potentials, crf_viterbi,
                    word_rows)
from .numcore import Tape, Tensor, _softmax_rows


@dataclass
class Tagger:
    """A model plus everything needed to build graphs and run the relinking loop."""

    model: HGGNNModel
    dhg: DhgConfig
    train_dist: tuple[float, float, float]
    window: int = 3
    pmi: PmiStats | None = None  # set for the co-occurrence-edge ablation

    def graph(self, sentence: Sentence) -> HeteroGraph:
        if self.pmi is not None:
            return init_graph_pmi(sentence, self.pmi, self.window)
        return init_graph(sentence, self.window)


@dataclass
class Outputs:
    potentials: Tensor  # (n, 4, 3) CRF log-potentials
    mlp_logits: Tensor  # (n, 4)
    sim_logits: Tensor  # (n, 3)
    dhg: DhgResult


def forward(tape: Tape, tagger: Tagger, sentence: Sentence, *, train: bool = False, epoch: int = 0,
            rng: np.random.Generator | None = None, pred_prob: float | None = None,
            edit_hook=None) -> Outputs:
    p = tagger.model.params
    res = run_dhg(tape, tagger.model, sentence, tagger.graph(sentence), tagger.dhg, tagger.train_dist,
                  train=train, epoch=epoch, rng=rng, pred_prob=pred_prob, edit_hook=edit_hook)
    n_words = len(sentence)
    m_w = word_rows(tape, res.m, n_words)
    n_w = word_rows(tape, res.n, n_words)
    return Outputs(crf_potentials(tape, m_w, p["crf.W"], p["crf.b"]),
                   as_mlp_logits(tape, n_w, p["mlp.W"], p["mlp.b"]),
                   as_sim_logits(tape, n_w, p["senti"]),
                   res)


@dataclass
class AspectPrediction:
    start: int
    end: int
    sentiment: str
    confidence: float

    def surface(self, sentence: Sentence) -> str:
        return " ".join(sentence.words[self.start - 1: self.end])


@dataclass
class SentencePrediction:
    sentence_id: str
    tags: list[str]
    aspects: list[AspectPrediction]
    token_dist: np.ndarray  # (n, 3) averaged per-token polarity distribution
    trace: list[IterationRecord] = field(default_factory=list)


def bio_spans(tags) -> list[tuple[int, int]]:
    """Maximal ``B I*`` runs as 1-based inclusive spans; a stray ``I`` opens a new span."""
    spans = []
    start = None
    for i, t in enumerate(tags, start=1):
        if t == "B" or (t == "I" and start is None):
            if start is not None:
                spans.append((start, i - 1))
            start = i
        elif t == "O":
            if start is not None:
                spans.append((start, i - 1))
            start = None
    if start is not None:
        spans.append((start, len(tags)))
    return spans


def span_sentiment(span: tuple[int, int], token_dist: np.ndarray) -> tuple[str, float]:
    start, end = span
    if end < start:
        raise ValueError(f"empty span {span}")
    mean = np.asarray(token_dist)[start - 1: end].mean(axis=0)
    k = int(np.argmax(mean))  # first maximum: POS < NEG < NEU
    return POLARITIES[k], float(mean[k])


def token_distributions(mlp_logits: np.ndarray, sim_logits: np.ndarray) -> np.ndarray:
    """Average of the similarity head and the renormalised polarity part of the MLP head."""
    mlp = _softmax_rows(mlp_logits)[:, :3]
    mlp = mlp / mlp.sum(axis=1, keepdims=True)
    return 0.5 * (mlp + _softmax_rows(sim_logits))


def predict(tagger: Tagger, sentence: Sentence, trace: bool = False) -> SentencePrediction:
    out = forward(Tape(record=False), tagger, sentence)
    tags = [ASPECT_TAGS[k] for k in crf_viterbi(out.potentials.value)]
    dist = token_distributions(out.mlp_logits.value, out.sim_logits.value)
    aspects = []
    for span in bio_spans(tags):
        pol, conf = span_sentiment(span, dist)
        aspects.append(AspectPrediction(span[0], span[1], pol, conf))
    return SentencePrediction(sentence.id, tags, aspects, dist, out.dhg.trace if trace else [])


def prediction_lines(sentence: Sentence, pred: SentencePrediction) -> list[str]:
    return [f"{sentence.id}\t{a.start}\t{a.end}\t{a.surface(sentence)}\t{a.sentiment}\t{a.confidence:.6f}"
            for a in pred.aspects]
