"""Fit the bundled toy corpus and print the training-set scores per epoch.

    python3 scripts/overfit_toy.py [--epochs 300] [--hidden 32] [--seed 0]

Afterwards the contrastive laptop sentence is decoded with its relinking trace.
"""
import argparse
import logging

from dhg_tbsa import toy_corpus_path
from dhg_tbsa.corpus import parse_dataset
from dhg_tbsa.decode import predict
from dhg_tbsa.dhg import dump_trace, render_links
from dhg_tbsa.trainer import TrainConfig, fit


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--epochs", type=int, default=300)
    ap.add_argument("--hidden", type=int, default=32)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    corpus = parse_dataset(toy_corpus_path())
    ckpt, tagger = fit(corpus, None, TrainConfig(epochs=args.epochs, hidden_dim=args.hidden, seed=args.seed))
    print(f"best epoch {ckpt.epoch}")
    print(ckpt.dev_metrics.table())

    sent = next(s for s in corpus if s.id == "macos")
    pred = predict(tagger, sent, trace=True)
    for a in pred.aspects:
        print(f"{a.surface(sent):<20} {a.sentiment}  {a.confidence:.3f}")
    print(render_links(sent, pred.trace))
    print("\n".join(dump_trace(pred.trace)))


if __name__ == "__main__":
    main()
