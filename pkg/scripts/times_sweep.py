"""Score one checkpoint with different numbers of relinking rounds.

    python3 scripts/times_sweep.py --model model.ckpt --data test.tsv [--max-times 5]

Prints one tab-separated row per setting: times, F-a, acc-s, F-s, F-all.
"""
import argparse
import dataclasses

from dhg_tbsa.corpus import parse_dataset
from dhg_tbsa.trainer import evaluate, load_tagger


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--model", required=True)
    ap.add_argument("--data", required=True)
    ap.add_argument("--max-times", type=int, default=5)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    tagger, _ = load_tagger(args.model)
    corpus = parse_dataset(args.data)
    base = tagger.dhg
    print("times\tF-a\tacc-s\tF-s\tF-all")
    for times in range(1, args.max_times + 1):
        tagger.dhg = dataclasses.replace(base, times=times)
        r, _ = evaluate(tagger, corpus, args.workers)
        print(f"{times}\t{r.f_a:.4f}\t{r.acc_s:.4f}\t{r.f_s:.4f}\t{r.f_all:.4f}")


if __name__ == "__main__":
    main()
