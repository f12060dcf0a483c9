"""Span, polarity and joint scores plus the multi-aspect / no-aspect subsets."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpus import POLARITIES, Corpus
from .decode import span_sentiment


def prf(tp: int, n_pred: int, n_gold: int) -> tuple[float, float, float]:
    """Precision, recall, F1 from counts. Nothing predicted and nothing gold scores 1."""
    if n_pred == 0 and n_gold == 0:
        return 1.0, 1.0, 1.0
    p = tp / n_pred if n_pred else 0.0
    r = tp / n_gold if n_gold else 0.0
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f


def _count_matches(pred, gold) -> tuple[int, int, int]:
    tp = n_pred = n_gold = 0
    for ps, gs in zip(pred, gold, strict=True):
        ps, gs = set(ps), set(gs)
        tp += len(ps & gs)
        n_pred += len(ps)
        n_gold += len(gs)
    return tp, n_pred, n_gold


def f_aspect(pred_spans, gold_spans) -> float:
    """Exact-span micro F1; arguments are per-sentence collections of ``(start, end)``."""
    return prf(*_count_matches(pred_spans, gold_spans))[2]


def f_all(pred_pairs, gold_pairs) -> float:
    """Micro F1 where a hit needs both the span and the polarity: ``(start, end, pol)``."""
    return prf(*_count_matches(pred_pairs, gold_pairs))[2]


def sentiment_scores(gold_spans, token_dists) -> tuple[float, float]:
    """Accuracy and macro F1 of polarities predicted on the gold spans.

    A class takes part in the macro average only if it occurs in gold or in
    the predictions. With no gold spans at all both scores are 1.
    """
    gold_lab, pred_lab = [], []
    for spans, dist in zip(gold_spans, token_dists, strict=True):
        for start, end, pol in spans:
            gold_lab.append(pol)
            pred_lab.append(span_sentiment((start, end), dist)[0])
    return polarity_scores(gold_lab, pred_lab)


def polarity_scores(gold_lab, pred_lab) -> tuple[float, float]:
    if not gold_lab:
        return 1.0, 1.0
    acc = sum(g == p for g, p in zip(gold_lab, pred_lab)) / len(gold_lab)
    f1s = []
    for c in POLARITIES:
        n_gold = sum(g == c for g in gold_lab)
        n_pred = sum(p == c for p in pred_lab)
        if n_gold == 0 and n_pred == 0:
            continue
        tp = sum(g == c and p == c for g, p in zip(gold_lab, pred_lab))
        f1s.append(prf(tp, n_pred, n_gold)[2])
    return acc, float(np.mean(f1s))


def sentence_acc_noop(pred_spans, gold_spans) -> float:
    """Share of no-aspect sentences on which nothing was predicted either."""
    hits = total = 0
    for ps, gs in zip(pred_spans, gold_spans, strict=True):
        if len(gs) == 0:
            total += 1
            hits += len(ps) == 0
    if total == 0:
        raise ValueError("no sentences without aspects; metric undefined")
    return hits / total


def subset_filter(corpus: Corpus, kind: str = "all") -> Corpus:
    if kind == "all":
        return corpus
    if kind == "multi":
        keep = [s for s in corpus.sentences if len(s.aspect_spans()) >= 2]
    elif kind == "noop":
        keep = [s for s in corpus.sentences if not s.aspect_spans()]
    else:
        raise ValueError(f"unknown subset {kind!r}")
    return Corpus(keep)


@dataclass
class MetricsReport:
    f_a: float
    acc_s: float
    f_s: float
    f_all: float
    sentence_acc_noop: float | None
    counts: dict[str, int] = field(default_factory=dict)

    def as_dict(self) -> dict[str, float | None]:
        return {"F-a": self.f_a, "acc-s": self.acc_s, "F-s": self.f_s, "F-all": self.f_all,
                "noop-acc": self.sentence_acc_noop}

    def table(self) -> str:
        rows = [(k, "n/a" if v is None else f"{100 * v:.2f}%") for k, v in self.as_dict().items()]
        rows += [(k, str(v)) for k, v in self.counts.items()]
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k:<{width}}  {v:>8}" for k, v in rows)

    def key_values(self) -> str:
        items = [(k, "nan" if v is None else repr(v)) for k, v in self.as_dict().items()]
        items += [(k, str(v)) for k, v in self.counts.items()]
        return "".join(f"{k}={v}\n" for k, v in items)


def evaluate_predictions(corpus: Corpus, predictions) -> MetricsReport:
    """Score ``SentencePrediction`` objects (aligned with ``corpus``) on every metric."""
    gold = [s.aspect_spans() for s in corpus.sentences]
    gold_sp = [[(a, b) for a, b, _ in g] for g in gold]
    pred_pairs = [[(a.start, a.end, a.sentiment) for a in p.aspects] for p in predictions]
    pred_sp = [[(a, b) for a, b, _ in pp] for pp in pred_pairs]
    tp_a, np_a, ng_a = _count_matches(pred_sp, gold_sp)
    tp_j, np_j, ng_j = _count_matches(pred_pairs, gold)
    acc_s, f_s = sentiment_scores(gold, [p.token_dist for p in predictions])
    try:
        noop = sentence_acc_noop(pred_sp, gold_sp)
    except ValueError:
        noop = None
    return MetricsReport(
        f_a=prf(tp_a, np_a, ng_a)[2], acc_s=acc_s, f_s=f_s, f_all=prf(tp_j, np_j, ng_j)[2],
        sentence_acc_noop=noop,
        counts={"aspect_tp": tp_a, "aspect_pred": np_a, "aspect_gold": ng_a,
                "pair_tp": tp_j, "pair_pred": np_j, "pair_gold": ng_j,
                "sentences": len(corpus.sentences)})
