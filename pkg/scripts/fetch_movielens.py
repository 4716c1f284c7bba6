#!/usr/bin/env python3
"""Download the MovieLens small ratings archive into data/ml-latest-small/.

The dataset unlocks the skipped acceptance tests.  Usage:

    python scripts/fetch_movielens.py [--dest data]

Requires network access to files.grouplens.org.
"""

from __future__ import annotations

import argparse
import io
import sys
import urllib.error
import urllib.request
import zipfile
from pathlib import Path

URL = "https://files.grouplens.org/datasets/movielens/ml-latest-small.zip"
EXPECTED = (610, 9724, 100_836)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dest", default="data", help="directory to extract into")
    args = parser.parse_args()
    dest = Path(args.dest)
    target = dest / "ml-latest-small" / "ratings.csv"
    if target.is_file():
        print(f"already present: {target}")
        return 0
    print(f"downloading {URL} ...")
    try:
        with urllib.request.urlopen(URL, timeout=60) as resp:
            payload = resp.read()
    except (urllib.error.URLError, OSError) as exc:
        print(f"download failed: {exc}", file=sys.stderr)
        print(
            "no network access? fetch ml-latest-small.zip elsewhere, extract, "
            "and point SVDREC_ML100K at ratings.csv",
            file=sys.stderr,
        )
        return 1
    with zipfile.ZipFile(io.BytesIO(payload)) as archive:
        member = "ml-latest-small/ratings.csv"
        if member not in archive.namelist():
            print(f"archive is missing {member}", file=sys.stderr)
            return 1
        archive.extract(member, dest)
    from svdrec import load_ratings_csv

    ds = load_ratings_csv(target)
    print(f"extracted {target}: {ds.m} users, {ds.n} items, {ds.nnz} ratings")
    if (ds.m, ds.n, ds.nnz) != EXPECTED:
        print(f"warning: expected {EXPECTED}, acceptance ranges may not apply")
    return 0


if __name__ == "__main__":
    sys.exit(main())
