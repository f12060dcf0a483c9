"""Loss assembly, the epoch loop and best-checkpoint bookkeeping."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import POLARITIES, SENTIMENT_TAGS, Corpus, EmbeddingTable, Sentence, sentiment_distribution
from .decode import Tagger, forward, predict
from .dhg import DhgConfig
from .graph import PmiStats
from .metrics import MetricsReport, evaluate_predictions
from .model import UNK, HGGNNModel, ModelConfig, NumericalError, crf_log_likelihood
from .numcore import Adam, Tape, Tensor, clip_global_norm, load_container, save_container

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 200
    batch_size: int = 32
    learning_rate: float = 1e-4
    clip_norm: float = 1.0
    dropout_rate: float = 0.5
    lam: float = 1.0
    dev_fraction: float = 0.2
    seed: int = 0
    hidden_dim: int = 64
    embed_dim: int = 400
    embed_init: float = 0.1
    layers: int = 3
    window: int = 3
    edges: str = "syntax"  # or "pmi"
    workers: int = 1
    dhg: DhgConfig = field(default_factory=DhgConfig)

    def __post_init__(self):
        for name in ("epochs", "batch_size", "hidden_dim", "embed_dim", "workers"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.learning_rate <= 0 or self.clip_norm <= 0:
            raise ValueError("learning_rate and clip_norm must be positive")
        if self.layers < 0 or self.window < 0:
            raise ValueError("layers and window must be non-negative")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")
        if not 0.0 < self.dev_fraction < 1.0:
            raise ValueError("dev_fraction must be in (0, 1)")
        if self.edges not in ("syntax", "pmi"):
            raise ValueError("edges must be 'syntax' or 'pmi'")

    def to_json(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_json(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        d["dhg"] = DhgConfig(**d.get("dhg", {}))
        return cls(**d)

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


# -- losses ------------------------------------------------------------------

def loss_ae(tape: Tape, nlls: list[Tensor], lengths: list[int]) -> Tensor:
    """Mean over sentences of the CRF negative log-likelihood divided by length."""
    terms = [tape.scale(nll, 1.0 / n) for nll, n in zip(nlls, lengths, strict=True)]
    return tape.mean(tape.concat([tape.reshape(t, (1,)) for t in terms]))


def sentence_as_loss(tape: Tape, mlp_logits: Tensor, sim_logits: Tensor, sentence: Sentence) -> Tensor:
    n = len(sentence)
    gold4 = np.array([SENTIMENT_TAGS.index(t) for t in sentence.sentiment_tags])
    mlp_lp = tape.log_softmax(mlp_logits)
    ce_mlp = tape.scale(tape.sum(tape.pick(mlp_lp, (np.arange(n), gold4))), -1.0 / n)
    aspect = np.flatnonzero(gold4 < len(POLARITIES))
    if aspect.size == 0:
        return tape.scale(ce_mlp, 0.5)
    sim_lp = tape.log_softmax(sim_logits)
    ce_sim = tape.scale(tape.sum(tape.pick(sim_lp, (aspect, gold4[aspect]))), -1.0 / aspect.size)
    return tape.scale(tape.add(ce_mlp, ce_sim), 0.5)


def loss_as(tape: Tape, mlp_logits: list[Tensor], sim_logits: list[Tensor], sentences: list[Sentence]) -> Tensor:
    """Half the token-mean 4-way MLP cross-entropy plus half the similarity-head
    cross-entropy over aspect tokens, averaged over sentences."""
    terms = [tape.reshape(sentence_as_loss(tape, a, b, s), (1,))
             for a, b, s in zip(mlp_logits, sim_logits, sentences, strict=True)]
    return tape.mean(tape.concat(terms))


def total_loss(tape: Tape, l_ae: Tensor, l_as: Tensor, lam: float = 1.0) -> Tensor:
    return tape.add(l_ae, tape.scale(l_as, lam))


def batch_loss(tape: Tape, tagger: Tagger, sentences: list[Sentence], lam: float = 1.0, **fwd) -> Tensor:
    """Joint loss of a batch built on one tape (used by gradient checks and tests)."""
    outs = [forward(tape, tagger, s, **fwd) for s in sentences]
    nlls = [tape.scale(crf_log_likelihood(tape, o.potentials, s.aspect_tags), -1.0) for o, s in zip(outs, sentences)]
    l_ae = loss_ae(tape, nlls, [len(s) for s in sentences])
    l_as = loss_as(tape, [o.mlp_logits for o in outs], [o.sim_logits for o in outs], sentences)
    return total_loss(tape, l_ae, l_as, lam)


# -- model construction / persistence ------------------------------------------

def build_tagger(train: Corpus, cfg: TrainConfig, embeddings: EmbeddingTable | None = None) -> Tagger:
    vocab = {UNK: 0}
    for w in train.vocabulary:
        vocab.setdefault(w, len(vocab))
    table = None
    if embeddings is not None:
        # ``embeddings`` rows follow train.vocabulary; prepend a seeded <unk> row
        unk = np.random.default_rng(cfg.seed).uniform(-0.1, 0.1, (1, embeddings.dimension))
        table = EmbeddingTable(embeddings.dimension, np.concatenate([unk, embeddings.vectors]))
    embed_dim = table.dimension if table is not None else cfg.embed_dim
    mcfg = ModelConfig(len(vocab), embed_dim, cfg.hidden_dim, cfg.layers, cfg.dropout_rate, cfg.embed_init)
    model = HGGNNModel(mcfg, vocab, table, seed=cfg.seed)
    pmi = PmiStats.from_corpus(train) if cfg.edges == "pmi" else None
    return Tagger(model, cfg.dhg, sentiment_distribution(train), cfg.window, pmi)


@dataclass
class Checkpoint:
    state: dict[str, np.ndarray]
    epoch: int
    dev_metrics: MetricsReport | None
    fingerprint: str


def save_checkpoint(path, ckpt: Checkpoint, tagger: Tagger, cfg: TrainConfig) -> None:
    m = tagger.model
    meta = {
        "epoch": ckpt.epoch,
        "fingerprint": ckpt.fingerprint,
        "dev_metrics": None if ckpt.dev_metrics is None else ckpt.dev_metrics.as_dict(),
        "train_config": cfg.to_json(),
        "model_config": dataclasses.asdict(m.cfg),
        "vocab": sorted(m.vocab, key=m.vocab.get),
        "train_dist": list(tagger.train_dist),
        "pmi": None if tagger.pmi is None else tagger.pmi.to_json(),
    }
    save_container(path, ckpt.state, meta)


def load_tagger(path) -> tuple[Tagger, dict]:
    state, meta = load_container(path)
    vocab = {w: i for i, w in enumerate(meta["vocab"])}
    model = HGGNNModel(ModelConfig(**meta["model_config"]), vocab)
    model.load_state_dict(state)
    cfg = TrainConfig.from_json(meta["train_config"])
    pmi = None if meta["pmi"] is None else PmiStats.from_json(meta["pmi"])
    return Tagger(model, cfg.dhg, tuple(meta["train_dist"]), cfg.window, pmi), meta


# -- training loop --------------------------------------------------------------

def evaluate(tagger: Tagger, corpus: Corpus, workers: int = 1) -> tuple[MetricsReport, list]:
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            preds = list(pool.map(lambda s: predict(tagger, s), corpus.sentences))
    else:
        preds = [predict(tagger, s) for s in corpus.sentences]
    return evaluate_predictions(corpus, preds), preds


def sentence_step(tagger: Tagger, sentence: Sentence, lam: float, weight: float, epoch: int,
                  rng: np.random.Generator, pred_prob: float | None = None) -> float:
    """Forward + backward for one sentence; grads accumulate scaled by ``weight``."""
    tape = Tape()
    try:
        out = forward(tape, tagger, sentence, train=True, epoch=epoch, rng=rng, pred_prob=pred_prob)
    except NumericalError as e:
        raise NumericalError(f"{e} (sentence {sentence.id!r})") from e
    nll = tape.scale(crf_log_likelihood(tape, out.potentials, sentence.aspect_tags), -1.0)
    l_ae = tape.scale(nll, 1.0 / len(sentence))
    l_as = sentence_as_loss(tape, out.mlp_logits, out.sim_logits, sentence)
    loss = total_loss(tape, l_ae, l_as, lam)
    value = float(loss.value)
    if not math.isfinite(value):
        raise NumericalError(f"non-finite loss on sentence {sentence.id!r}")
    tape.backward(tape.scale(loss, weight))
    return value


def train_step(tagger: Tagger, opt: Adam, batch: list[Sentence], cfg: TrainConfig, epoch: int,
               rng: np.random.Generator, pred_prob: float | None = None) -> float:
    """One optimizer update on a batch; returns the mean sentence loss."""
    params = tagger.model.parameters()
    for p in params:
        p.zero_grad()
    try:
        total = sum(sentence_step(tagger, s, cfg.lam, 1.0 / len(batch), epoch, rng, pred_prob) for s in batch)
    except FloatingPointError as e:
        raise NumericalError(f"{e} (batch containing {[s.id for s in batch]})") from e
    clip_global_norm(params, cfg.clip_norm)
    opt.step()
    return total / len(batch)


def fit(train: Corpus, dev: Corpus | None, cfg: TrainConfig, embeddings: EmbeddingTable | None = None,
        log_path=None, checkpoint_path=None, tagger: Tagger | None = None) -> tuple[Checkpoint, Tagger]:
    """Train for ``cfg.epochs`` epochs and keep the state with the best dev F-all.

    ``dev=None`` selects on the training set itself (used for overfitting
    sanity runs). Replacement needs a strict improvement, so ties keep the
    earlier epoch.
    """
    tagger = tagger or build_tagger(train, cfg, embeddings)
    dev = dev if dev is not None else train
    rng = np.random.default_rng(cfg.seed)
    opt = Adam(tagger.model.parameters(), lr=cfg.learning_rate)
    best: Checkpoint | None = None
    log_fh = open(log_path, "w", encoding="utf-8") if log_path else None
    try:
        for epoch in range(cfg.epochs):
            order = rng.permutation(len(train.sentences))
            losses = []
            for start in range(0, len(order), cfg.batch_size):
                batch = [train.sentences[i] for i in order[start: start + cfg.batch_size]]
                losses.append(train_step(tagger, opt, batch, cfg, epoch, rng) * len(batch))
            train_loss = sum(losses) / len(order)
            report, _ = evaluate(tagger, dev, cfg.workers)
            if log_fh:
                log_fh.write(f"{epoch + 1}\t{train_loss:.6f}\t{report.f_a:.6f}\t{report.acc_s:.6f}\t"
                             f"{report.f_s:.6f}\t{report.f_all:.6f}\n")
                log_fh.flush()
            log.info("epoch %d loss %.4f dev F-all %.4f", epoch + 1, train_loss, report.f_all)
            if best is None or report.f_all > best.dev_metrics.f_all:
                best = Checkpoint(tagger.model.state_dict(), epoch + 1, report, cfg.fingerprint())
                if checkpoint_path:
                    save_checkpoint(checkpoint_path, best, tagger, cfg)
    finally:
        if log_fh:
            log_fh.close()
    tagger.model.load_state_dict(best.state)
    return best, tagger


def read_config_file(path) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out
