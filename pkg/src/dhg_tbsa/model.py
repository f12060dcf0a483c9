"""HGGNN encoder stacks, CRF aspect head and the two sentiment heads.

Row-vector convention throughout: a node's hidden state is a row of ``H``
(shape ``(n_nodes, hidden)``) and layers compute ``H @ W``.

Per-layer weights are stored fused:

* ``rel``    (4*hidden, 3*hidden): row block r = relation (to, from, position,
  sentiment); column blocks = update gate, reset gate, candidate.
* ``inp``    (hidden, 3*hidden): input weights for the same three columns.
* ``rec_zr`` (hidden, 2*hidden): recurrent weights of the two gates.
* ``rec``    (hidden, hidden): recurrent weight of the candidate.
* ``k``      (hidden,): aggregation bias shared by all relations.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .corpus import ASPECT_TAGS, POLARITIES, SENTIMENT_TAGS, EmbeddingTable, Sentence
from .graph import EdgeType, HeteroGraph
from .numcore import Parameter, Tape, Tensor, dropout

N_REL = len(EdgeType)
N_TAGS = len(ASPECT_TAGS)  # O, B, I
START = N_TAGS  # virtual start row of the transition table
TAG_INDEX = {t: i for i, t in enumerate(ASPECT_TAGS)}
STACKS = ("shared", "ae", "as")
UNK = "<unk>"


class NumericalError(FloatingPointError):
    pass


@dataclass
class ModelConfig:
    vocab_size: int
    embed_dim: int = 400
    hidden_dim: int = 64
    layers: int = 3
    dropout: float = 0.5
    embed_init: float = 0.1  # spread of the random embeddings used when no file is given


def _glorot(rng, fan_in, fan_out, shape=None):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape or (fan_in, fan_out))


class HGGNNModel:
    def __init__(self, cfg: ModelConfig, vocab: dict[str, int],
                 embeddings: EmbeddingTable | None = None, seed: int = 0):
        if UNK not in vocab:
            raise ValueError(f"model vocabulary must contain {UNK!r}")
        self.cfg = cfg
        self.vocab = vocab
        rng = np.random.default_rng(seed)
        H, E = cfg.hidden_dim, cfg.embed_dim
        p: dict[str, Tensor] = {}
        if embeddings is not None:
            if embeddings.vectors.shape != (cfg.vocab_size, E):
                raise ValueError("embedding table does not match vocabulary size / embed_dim")
            p["embed"] = Parameter(embeddings.vectors.copy(), "embed")
        else:
            p["embed"] = Parameter(rng.uniform(-cfg.embed_init, cfg.embed_init, (cfg.vocab_size, E)), "embed")
        p["input_proj"] = Parameter(_glorot(rng, E, H), "input_proj")
        p["senti"] = Parameter(_glorot(rng, 3, H), "senti")
        for stack in STACKS:
            for layer in range(cfg.layers):
                pre = f"{stack}.{layer}."
                rel = np.concatenate([np.concatenate([_glorot(rng, H, H) for _ in range(3)], axis=1)
                                      for _ in range(N_REL)], axis=0)
                p[pre + "rel"] = Parameter(rel, pre + "rel")
                p[pre + "inp"] = Parameter(np.concatenate([_glorot(rng, H, H) for _ in range(3)], axis=1), pre + "inp")
                p[pre + "rec_zr"] = Parameter(np.concatenate([_glorot(rng, H, H) for _ in range(2)], axis=1), pre + "rec_zr")
                p[pre + "rec"] = Parameter(_glorot(rng, H, H), pre + "rec")
                p[pre + "k"] = Parameter(np.zeros(H), pre + "k")
        p["crf.W"] = Parameter(_glorot(rng, H, (N_TAGS + 1) * N_TAGS), "crf.W")
        p["crf.b"] = Parameter(np.zeros((N_TAGS + 1) * N_TAGS), "crf.b")
        p["mlp.W"] = Parameter(_glorot(rng, H, len(SENTIMENT_TAGS)), "mlp.W")
        p["mlp.b"] = Parameter(np.zeros(len(SENTIMENT_TAGS)), "mlp.b")
        self.params = p

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def layer(self, stack: str, i: int) -> dict[str, Tensor]:
        pre = f"{stack}.{i}."
        return {k: self.params[pre + k] for k in ("rel", "inp", "rec_zr", "rec", "k")}

    def stack(self, name: str) -> list[dict[str, Tensor]]:
        return [self.layer(name, i) for i in range(self.cfg.layers)]

    def word_ids(self, sentence: Sentence) -> np.ndarray:
        unk = self.vocab[UNK]
        return np.array([self.vocab.get(w, unk) for w in sentence.words], dtype=np.int64)

    def node_inputs(self, tape: Tape, sentence: Sentence) -> Tensor:
        """Input rows for every node: projected word embeddings, then the sentiment embeddings."""
        emb = tape.rows(self.params["embed"], self.word_ids(sentence))
        words = tape.matmul(emb, self.params["input_proj"])
        return tape.concat([words, self.params["senti"]], axis=0)

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: v.value.copy() for k, v in self.params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        for k, v in self.params.items():
            if state[k].shape != v.shape:
                raise ValueError(f"shape mismatch for {k}: {state[k].shape} vs {v.shape}")
            v.value = np.array(state[k], dtype=np.float64)


# -- message passing -----------------------------------------------------------

def adjacency_stack(graph: HeteroGraph) -> np.ndarray:
    """(4, n_nodes, n_nodes) row-normalised adjacency, one slice per edge type."""
    return np.stack([graph.adjacency(t) for t in EdgeType])


def neighbor_aggregate(tape: Tape, adj: Tensor, h: Tensor, k: Tensor) -> Tensor:
    """Mean of neighbour states plus ``k``; nodes without neighbours get exactly ``k``."""
    return tape.add(tape.matmul(adj, h), k)


def aggregate_relations(tape: Tape, adj: np.ndarray, h: Tensor, k: Tensor) -> Tensor:
    """All four ``neighbor_aggregate`` results side by side: shape (n_nodes, 4*hidden)."""
    n_rel = adj.shape[0]
    value = np.concatenate([a @ h.value + k.value for a in adj], axis=1)

    def back(g):
        blocks = np.split(g, n_rel, axis=1)
        gh = sum(a.T @ gb for a, gb in zip(adj, blocks))
        gk = sum(gb.sum(axis=0) for gb in blocks)
        return [gh, gk]

    return tape.custom(value, (h, k), back)


def hggnn_cell(tape: Tape, w: dict[str, Tensor], x: Tensor, h_prev: Tensor, adj: np.ndarray) -> Tensor:
    hid = h_prev.shape[1]
    aggs = aggregate_relations(tape, adj, h_prev, w["k"])
    pre = tape.add(tape.matmul(aggs, w["rel"]), tape.matmul(x, w["inp"]))
    gates = tape.add(tape.cols(pre, 0, 2 * hid), tape.matmul(h_prev, w["rec_zr"]))
    z = tape.sigmoid(tape.cols(gates, 0, hid))
    r = tape.sigmoid(tape.cols(gates, hid, 2 * hid))
    cand = tape.tanh(tape.add(tape.cols(pre, 2 * hid, 3 * hid),
                              tape.matmul(tape.mul(r, h_prev), w["rec"])))
    keep = tape.sub(Tensor(1.0), z)
    h = tape.add(tape.mul(keep, h_prev), tape.mul(z, cand))
    if not np.all(np.isfinite(h.value)):
        raise NumericalError("non-finite hidden state in HGGNN cell")
    return h


def run_stack(tape: Tape, layers: list[dict[str, Tensor]], x: Tensor, h0: Tensor, adj: np.ndarray,
              rate: float = 0.0, train: bool = False, rng: np.random.Generator | None = None) -> Tensor:
    if not layers:
        return h0
    x = dropout(tape, x, rate, train, rng)
    h = h0
    for w in layers:
        h = hggnn_cell(tape, w, x, h, adj)
    return h


def word_rows(tape: Tape, h: Tensor, n_words: int) -> Tensor:
    return tape.rows(h, np.arange(n_words))


# -- CRF -----------------------------------------------------------------------

def crf_potentials(tape: Tape, m_words: Tensor, W: Tensor, b: Tensor) -> Tensor:
    """Log-potentials ``S[i, prev, cur]`` of shape (n, 4, 3); ``prev == 3`` is START."""
    flat = tape.add(tape.matmul(m_words, W), b)
    return tape.reshape(flat, (m_words.shape[0], N_TAGS + 1, N_TAGS))


def _lse(x: np.ndarray, axis: int) -> np.ndarray:
    mx = x.max(axis=axis, keepdims=True)
    return (mx + np.log(np.exp(x - mx).sum(axis=axis, keepdims=True))).squeeze(axis)


def crf_log_partition(S: np.ndarray) -> tuple[float, np.ndarray]:
    """Forward algorithm in log space; returns ``log Z`` and the alpha table."""
    n = S.shape[0]
    alpha = np.empty((n, N_TAGS))
    alpha[0] = S[0, START]
    for i in range(1, n):
        alpha[i] = _lse(alpha[i - 1][:, None] + S[i, :N_TAGS], axis=0)
    return float(_lse(alpha[-1], axis=0)), alpha


def crf_pair_marginals(S: np.ndarray) -> tuple[float, np.ndarray]:
    """Posterior probability of every (prev, cur) transition at every position."""
    n = S.shape[0]
    logz, alpha = crf_log_partition(S)
    beta = np.zeros((n, N_TAGS))
    for i in range(n - 2, -1, -1):
        beta[i] = _lse(S[i + 1, :N_TAGS] + beta[i + 1][None, :], axis=1)
    marg = np.zeros_like(S)
    marg[0, START] = np.exp(S[0, START] + beta[0] - logz)
    for i in range(1, n):
        marg[i, :N_TAGS] = np.exp(alpha[i - 1][:, None] + S[i, :N_TAGS] + beta[i][None, :] - logz)
    return logz, marg


def gold_indices(tags) -> np.ndarray:
    try:
        return np.array([TAG_INDEX[t] if isinstance(t, str) else int(t) for t in tags], dtype=np.int64)
    except KeyError as e:
        raise ValueError(f"invalid aspect tag {e.args[0]!r}") from None


def crf_path_score(S: np.ndarray, y) -> float:
    prev = np.concatenate([[START], y[:-1]])
    return float(S[np.arange(len(y)), prev, y].sum())


def crf_log_likelihood(tape: Tape, S: Tensor, gold) -> Tensor:
    """``log P(gold | potentials)``: gold path score minus the log partition."""
    y = gold_indices(gold)
    if S.value.ndim != 3 or S.shape[0] != len(y) or len(y) == 0:
        raise ValueError("gold tag sequence does not match the potentials")
    if np.any((y < 0) | (y >= N_TAGS)):
        raise ValueError("gold tag index out of range")
    logz, marg = crf_pair_marginals(S.value)
    value = crf_path_score(S.value, y) - logz
    onehot = np.zeros_like(S.value)
    onehot[np.arange(len(y)), np.concatenate([[START], y[:-1]]), y] = 1.0

    def back(g):
        return [g * (onehot - marg)]

    return tape.custom(np.asarray(value), (S,), back)


def crf_viterbi(S: np.ndarray) -> list[int]:
    """Best tag path; among equal-scoring paths the lexicographically smallest wins.

    Runs the max-product recursion backwards (best suffix score per tag) and
    then picks tags left to right, taking the smallest index that attains the
    optimum at each step.
    """
    S = np.asarray(S, dtype=np.float64)
    n = S.shape[0]
    suffix = np.zeros((n, N_TAGS))
    for i in range(n - 2, -1, -1):
        suffix[i] = (S[i + 1, :N_TAGS] + suffix[i + 1][None, :]).max(axis=1)
    path = []
    prev = START
    for i in range(n):
        scores = S[i, prev] + suffix[i]
        prev = int(np.flatnonzero(scores == scores.max())[0])
        path.append(prev)
    return path


def crf_brute_force(S: np.ndarray) -> tuple[float, list[int], dict[tuple[int, ...], float]]:
    """Enumerate all tag paths: ``(log Z, argmax path, path -> score)``. Test oracle."""
    n = S.shape[0]
    scores = {}
    for path in itertools.product(range(N_TAGS), repeat=n):
        scores[path] = crf_path_score(S, np.array(path))
    vals = np.array(list(scores.values()))
    mx = vals.max()
    logz = float(mx + np.log(np.exp(vals - mx).sum()))
    best = None
    for path, sc in scores.items():  # product() yields lexicographic order
        if best is None or sc > scores[best]:
            best = path
    return logz, list(best), scores


# -- sentiment heads -----------------------------------------------------------

def as_mlp_logits(tape: Tape, n_words: Tensor, W: Tensor, b: Tensor) -> Tensor:
    return tape.add(tape.matmul(n_words, W), b)


def as_mlp_probs(tape: Tape, n_words: Tensor, W: Tensor, b: Tensor) -> Tensor:
    """Per-token distribution over POS, NEG, NEU, NONE."""
    return tape.softmax(as_mlp_logits(tape, n_words, W, b))


def as_sim_logits(tape: Tape, n_words: Tensor, h_senti: Tensor) -> Tensor:
    if h_senti.shape[0] != len(POLARITIES):
        raise ValueError("h_senti must have one row per polarity")
    return tape.inner(n_words, h_senti)


def as_sim_probs(tape: Tape, n_words: Tensor, h_senti: Tensor) -> Tensor:
    """Softmax over inner products with the three sentiment-node embeddings."""
    return tape.softmax(as_sim_logits(tape, n_words, h_senti))
