"""Sweep tool accuracy (and disabled tools) for the scripted tool answerer.

Usage: python3 scripts/tool_accuracy_study.py [--seed 2024] [--tool-seed 0] [--items 1000]
"""

import argparse

from tsalign.datasets import CorpusSpec, compose_corpus
from tsalign.evalkit import TOOL_KINDS, run_benchmark, tool_answerer


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--tool-seed", type=int, default=0)
    ap.add_argument("--items", type=int, default=1000)
    args = ap.parse_args()
    half = args.items // 2
    corpus = compose_corpus(CorpusSpec(uts=half, mts_shape=(args.items - half) // 2,
                                       mts_local=args.items - half - (args.items - half) // 2,
                                       master_seed=args.seed))
    print(f"{'setting':<28} {'cate F1':>8} {'num acc':>8} {'overall':>8} {'truthful':>9}")
    for acc in (0.5, 0.7, 0.8, 0.9, 0.95, 1.0):
        model = tool_answerer(acc, seed=args.tool_seed)
        s = run_benchmark(corpus, model).summary
        print(f"{f'acc={acc}':<28} {s['categorical_f1']:8.4f} {s['numeric_rel_acc']:8.4f} "
              f"{s['overall']:8.4f} {model.truthful_fraction():9.4f}")
    for off in TOOL_KINDS:
        model = tool_answerer(1.0, [t for t in TOOL_KINDS if t != off], seed=args.tool_seed)
        s = run_benchmark(corpus, model).summary
        print(f"{f'acc=1.0 without {off}':<28} {s['categorical_f1']:8.4f} {s['numeric_rel_acc']:8.4f} "
              f"{s['overall']:8.4f} {'':>9}")


if __name__ == "__main__":
    main()
