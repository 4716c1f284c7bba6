#!/usr/bin/env python3
"""Headline MovieLens-small runs: rank selection, residual target, MAE.

Needs the dataset on disk (scripts/fetch_movielens.py, or SVDREC_ML100K
pointing at ratings.csv).  Runs three experiments and prints a summary:

1. fixed-precision factorization at tolerance 0.5 (power iteration engine)
2. adaptive factorization at rank 118 (pass-capped engine)
3. recommend pipeline, five seeds, median test MAE and chosen rank

    python scripts/run_ml100k.py [--out ml100k-out]
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from svdrec.cli import main as cli_main


def find_ratings() -> Path | None:
    env = os.environ.get("SVDREC_ML100K")
    if env and Path(env).is_file():
        return Path(env)
    local = Path(__file__).resolve().parent.parent / "data" / "ml-latest-small" / "ratings.csv"
    return local if local.is_file() else None


def result_of(out_dir: Path) -> dict:
    return json.loads((out_dir / "report.json").read_text())["result"]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="ml100k-out")
    args = parser.parse_args()
    ratings = find_ratings()
    if ratings is None:
        print(
            "ratings.csv not found; run scripts/fetch_movielens.py or set "
            "SVDREC_ML100K",
            file=sys.stderr,
        )
        return 1
    out = Path(args.out)

    print("== fixed-precision factorization, tol 0.5 ==")
    code = cli_main(
        ["pca", "--input", str(ratings), "--tol", "0.5", "--power", "4",
         "--seed", "0", "--out", str(out / "qb")]
    )
    if code != 0:
        return code
    qb = result_of(out / "qb")

    print("\n== adaptive factorization, rank 118 ==")
    code = cli_main(
        ["pca", "--input", str(ratings), "--rank", "118", "--passes", "10",
         "--seed", "0", "--out", str(out / "pca118")]
    )
    if code != 0:
        return code
    pca = result_of(out / "pca118")

    print("\n== recommend, five seeds ==")
    ks = []
    maes = []
    for seed in range(5):
        code = cli_main(
            ["recommend", "--input", str(ratings), "--seed", str(seed),
             "--out", str(out / f"rec-seed{seed}")]
        )
        if code != 0:
            return code
        res = result_of(out / f"rec-seed{seed}")
        ks.append(res["k"])
        maes.append(res["mae_test"])

    print("\n================ summary ================")
    print(f"tol 0.5 factorization: rank {qb['k']}, residual {qb['residual_rel']:.4f}")
    print(f"rank-118 factorization: residual {pca['residual_rel']:.4f}")
    print(f"recommend ranks: {ks} (median {np.median(ks):.0f})")
    print(f"recommend test MAE: {[round(v, 4) for v in maes]} "
          f"(median {np.median(maes):.4f})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
