#!/usr/bin/env python3
"""Full-scale sensitivity runs over the desk corpus: fidelity vs top-K depth,
vocabulary size per document, and candidate count. Writes one CSV per
parameter into the output directory (default runs/sweeps)."""

import argparse
import os
import subprocess
import sys

ROOT = os.path.normpath(os.path.join(os.path.dirname(__file__), ".."))

SWEEPS = {
    "topk": "10,30,50",
    "nwords": "5,10,20",
    "cf-k": "1,3,5",
}


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=os.path.join(ROOT, "runs", "sweeps"))
    parser.add_argument("--seed", type=int, default=20240811)
    parser.add_argument("--n-queries", type=int, default=50)
    args = parser.parse_args()

    for param, values in SWEEPS.items():
        cmd = [
            sys.executable, "-m", "cfir.cli", "sweep",
            "--corpus", os.path.join(ROOT, "data", "desk", "corpus.jsonl"),
            "--queries", os.path.join(ROOT, "data", "desk", "queries.tsv"),
            "--model", "bm25",
            "--param", param,
            "--values", values,
            "--seed", str(args.seed),
            "--n-queries", str(args.n_queries),
            "--out", args.out,
        ]
        print("+", " ".join(cmd))
        subprocess.run(cmd, check=True, env={**os.environ,
                                             "PYTHONPATH": os.path.join(ROOT, "src")})


if __name__ == "__main__":
    main()
