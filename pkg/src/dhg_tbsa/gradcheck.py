"""End-to-end gradient check of the joint loss on a tiny model."""
from __future__ import annotations

from .corpus import Corpus, Sentence, Token
from .dhg import DhgConfig
from .numcore import grad_check
from .trainer import TrainConfig, batch_loss, build_tagger


def tiny_sentence() -> Sentence:
    rows = [("great", 2, "amod", "O", "NONE"), ("service", 0, "root", "B", "POS"), ("!", 2, "punct", "O", "NONE")]
    return Sentence("gradcheck", tuple(Token(i, *r) for i, r in enumerate(rows, start=1)))


def end_to_end_grad_check(hidden: int = 8, times: int = 2, eps: float = 1e-5, seed: int = 0,
                          epsilon: float = 0.75, sentence: Sentence | None = None) -> dict[str, float]:
    """Max relative error per parameter tensor for the eval-mode joint loss
    (no dropout, no teacher forcing)."""
    sentence = sentence or tiny_sentence()
    # unit-scale embeddings keep hidden states (and hence gradients) well above
    # finite-difference roundoff on such a small model
    cfg = TrainConfig(hidden_dim=hidden, embed_dim=hidden, embed_init=1.0, seed=seed,
                      dhg=DhgConfig(times=times, epsilon=epsilon))
    tagger = build_tagger(Corpus([sentence]), cfg)

    def f(tape):
        return batch_loss(tape, tagger, [sentence], cfg.lam)

    return grad_check(f, tagger.model.parameters(), eps=eps, per_tensor=True)
