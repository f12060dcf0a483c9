"""Command line: train, eval, predict, gradcheck, stats.

Log verbosity follows the ``DHG_TBSA_LOG`` environment variable
(``WARNING`` by default).
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path


from .corpus import (CorpusError, concat_embeddings, corpus_stats, load_embeddings,
                     parse_dataset, split_train_dev, write_dataset)
from .decode import prediction_lines
from .dhg import DhgConfig, dump_trace, render_links
from .metrics import subset_filter
from .trainer import TrainConfig, evaluate, fit, load_tagger, read_config_file

# config-file key / flag dest -> (TrainConfig field or "dhg.<field>", type)
OVERRIDES = {
    "epochs": ("epochs", int),
    "batch_size": ("batch_size", int),
    "learning_rate": ("learning_rate", float),
    "clip_norm": ("clip_norm", float),
    "dropout": ("dropout_rate", float),
    "lambda": ("lam", float),
    "dev_fraction": ("dev_fraction", float),
    "seed": ("seed", int),
    "hidden": ("hidden_dim", int),
    "embed_dim": ("embed_dim", int),
    "embed_init": ("embed_init", float),
    "layers": ("layers", int),
    "window": ("window", int),
    "edges": ("edges", str),
    "workers": ("workers", int),
    "dhg_times": ("dhg.times", int),
    "epsilon": ("dhg.epsilon", float),
    "mu": ("dhg.mu", float),
    "tf_keep": ("dhg.tf_keep", float),
}


def build_train_config(file_values: dict[str, str], flags: argparse.Namespace) -> TrainConfig:
    top, dhg = {}, {}
    merged = {k.replace("-", "_"): v for k, v in file_values.items()}
    for key in merged:
        if key not in OVERRIDES:
            raise ValueError(f"unknown config key {key!r}")
    for key, value in vars(flags).items():
        if key in OVERRIDES and value is not None:
            merged[key] = value
    for key, raw in merged.items():
        target, typ = OVERRIDES[key]
        value = typ(raw)
        if target.startswith("dhg."):
            dhg[target[4:]] = value
        else:
            top[target] = value
    return TrainConfig(dhg=DhgConfig(**dhg), **top)


def _add_overrides(p: argparse.ArgumentParser) -> None:
    for key, (_target, typ) in OVERRIDES.items():
        flag = "--" + key.replace("_", "-")
        if key == "edges":
            p.add_argument(flag, dest=key, choices=["syntax", "pmi"])
        else:
            p.add_argument(flag, dest=key, type=typ)


def cmd_train(args) -> int:
    cfg = build_train_config(read_config_file(args.config) if args.config else {}, args)
    corpus = parse_dataset(args.data)
    out = Path(args.out)
    if args.dev:
        train, dev = corpus, parse_dataset(args.dev)
    else:
        train, dev = split_train_dev(corpus, cfg.dev_fraction, cfg.seed)
        write_dataset(dev, out.with_suffix(out.suffix + ".dev.tsv"))
    embeddings = None
    if args.embeddings:
        tables = [load_embeddings(path, train.vocabulary, dim, seed=cfg.seed + k)
                  for k, (path, dim) in enumerate(zip(args.embeddings, _embedding_dims(args)))]
        embeddings = concat_embeddings(*tables)
    log_path = args.log or out.with_suffix(out.suffix + ".metrics.tsv")
    ckpt, _ = fit(train, dev, cfg, embeddings, log_path=log_path, checkpoint_path=out)
    print(f"best epoch {ckpt.epoch}")
    print(ckpt.dev_metrics.table())
    return 0


def _embedding_dims(args) -> list[int]:
    dims = args.embedding_dim or []
    if len(dims) != len(args.embeddings):
        raise ValueError("give one --embedding-dim per --embeddings file")
    return dims


def cmd_eval(args) -> int:
    tagger, meta = load_tagger(args.model)
    if args.dhg_times is not None:
        tagger.dhg = DhgConfig(args.dhg_times, tagger.dhg.epsilon, tagger.dhg.mu, tagger.dhg.tf_keep)
    corpus = subset_filter(parse_dataset(args.data), args.subset)
    if not corpus.sentences:
        raise ValueError(f"subset {args.subset!r} is empty")
    report, _ = evaluate(tagger, corpus, args.workers)
    print(f"subset: {args.subset} ({len(corpus)} sentences)")
    print(report.table())
    if args.report:
        Path(args.report).write_text(report.key_values(), encoding="utf-8")
    return 0


def cmd_predict(args) -> int:
    tagger, _ = load_tagger(args.model)
    corpus = parse_dataset(args.data)
    from .decode import predict

    lines, trace_lines = [], []
    for s in corpus.sentences:
        pred = predict(tagger, s, trace=args.trace)
        lines.extend(prediction_lines(s, pred))
        if args.trace:
            trace_lines.append(f"# {s.id}")
            trace_lines.append(f"# {render_links(s, pred.trace)}")
            trace_lines.extend(dump_trace(pred.trace))
    text = "".join(line + "\n" for line in lines)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if args.trace:
        trace_text = "".join(line + "\n" for line in trace_lines)
        if args.trace_out:
            Path(args.trace_out).write_text(trace_text, encoding="utf-8")
        else:
            sys.stdout.write(trace_text)
    return 0


def cmd_gradcheck(args) -> int:
    from .gradcheck import end_to_end_grad_check

    errors = end_to_end_grad_check(hidden=args.hidden, times=args.times, eps=args.eps, seed=args.seed)
    worst = max(errors.values())
    for name, err in errors.items():
        logging.getLogger(__name__).info("%-16s %.3e", name, err)
    print(f"max relative error {worst:.3e}")
    return 0 if worst < args.tol else 1


def cmd_stats(args) -> int:
    stats = corpus_stats(parse_dataset(args.data))
    print("\t".join(stats))
    print("\t".join(str(v) for v in stats.values()))
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dhg-tbsa", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model and write the best checkpoint")
    p.add_argument("--data", required=True)
    p.add_argument("--dev", help="dev file; default is a seeded split of --data")
    p.add_argument("--embeddings", action="append", help="embedding text file (repeat to concatenate)")
    p.add_argument("--embedding-dim", action="append", type=int)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--log", help="metrics log path (default: <out>.metrics.tsv)")
    _add_overrides(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint on a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--subset", choices=["all", "multi", "noop"], default="all")
    p.add_argument("--dhg-times", type=int)
    p.add_argument("--report", help="also write key=value metrics here")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="write aspect predictions (and relinking traces)")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out")
    p.add_argument("--trace", action="store_true")
    p.add_argument("--trace-out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("gradcheck", help="end-to-end finite-difference gradient check")
    p.add_argument("--hidden", type=int, default=8)
    p.add_argument("--times", type=int, default=2)
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("stats", help="corpus counts")
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("DHG_TBSA_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except (OSError, ValueError, CorpusError, FloatingPointError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
