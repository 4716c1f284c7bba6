"""Command line front end: factorize, recommend, benchmark."""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import scipy.linalg

from .cf import auto_latent_factors, evaluate_mae
from .data import (
    CsvSchema,
    DataFormatError,
    EmptyDatasetError,
    RatingsDataset,
    RatingSample,
    SplitSpec,
    dataset_to_sparse,
    load_matrix_market,
    load_ratings_csv,
    prune_min_degree,
    split,
    write_split_manifest,
)
from .linalg import (
    NearSingularError,
    RankDeficientError,
    SvdTriplet,
    fro_norm_sq,
)
from .rsvd import (
    FixedRank,
    FrobTolerance,
    QbState,
    RankExhaustedError,
    adaptive_pca,
    basic_rsvd,
    fixed_precision_qb,
)
from .sparse import SparseRatings

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3

# Residuals are measured against the densified matrix up to this size and
# estimated from captured energy beyond it.
MAX_DENSE_ELEMS = 20_000_000


@dataclass
class RunReport:
    """Everything one command run produced, serializable to JSON and back."""

    command: str
    seed: int
    dataset: dict
    params: dict
    result: dict
    timings_s: dict

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        return cls(**json.loads(text))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="svdrec",
        description="Randomized low-rank factorization and latent-factor recommendation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_io(p: argparse.ArgumentParser) -> None:
        p.add_argument("--input", required=True, help="ratings file")
        p.add_argument(
            "--format",
            choices=("csv", "matrixmarket", "auto"),
            default="auto",
            help="input format; auto picks matrixmarket for .mtx/.mm",
        )
        p.add_argument("--delimiter", default=",", help="csv field delimiter")
        p.add_argument(
            "--no-header", action="store_true", help="csv file has no header line"
        )
        p.add_argument("--user-col", type=int, default=0)
        p.add_argument("--item-col", type=int, default=1)
        p.add_argument("--rating-col", type=int, default=2)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", required=True, help="output directory")

    pca = sub.add_parser("pca", help="low-rank factorization of the ratings matrix")
    add_io(pca)
    target = pca.add_mutually_exclusive_group(required=True)
    target.add_argument("--rank", type=int, help="fixed target rank")
    target.add_argument(
        "--tol", type=float, help="relative Frobenius residual target in (0, 1)"
    )
    pca.add_argument("--block", type=int, default=20, help="columns added per block")
    pca.add_argument(
        "--passes",
        type=int,
        default=10,
        help="sparse passes per block for the pass-capped factorizer",
    )
    pca.add_argument(
        "--power",
        type=int,
        default=None,
        help="power iterations; selects the power-iteration factorizer",
    )
    pca.add_argument(
        "--oversample",
        type=int,
        default=0,
        help="extra sketch columns for --rank with --power",
    )

    rec = sub.add_parser("recommend", help="train factors and score held-out ratings")
    add_io(rec)
    rec.add_argument(
        "--prune-min",
        type=int,
        default=0,
        help="drop users/items with fewer ratings than this before splitting",
    )
    rec.add_argument(
        "--split",
        default="0.9,0.05,0.05",
        help="train,validation,test fractions summing to 1",
    )
    rec.add_argument("--block", type=int, default=20)
    rec.add_argument("--passes", type=int, default=10)
    rec.add_argument(
        "--patience",
        type=int,
        default=2,
        help="consecutive non-improving blocks before stopping",
    )
    rec.add_argument("--min-improvement", type=float, default=1e-4)

    bench = sub.add_parser("bench", help="run a sweep of pca/recommend cells")
    bench.add_argument("--config", required=True, help="JSON sweep description")
    bench.add_argument("--out", required=True, help="output directory")
    return parser


def _schema(args: argparse.Namespace) -> CsvSchema:
    return CsvSchema(
        delimiter=args.delimiter,
        user_col=args.user_col,
        item_col=args.item_col,
        rating_col=args.rating_col,
        has_header=not args.no_header,
    )


def _resolve_format(path: Path, fmt: str) -> str:
    if fmt != "auto":
        return fmt
    return "matrixmarket" if path.suffix.lower() in (".mtx", ".mm") else "csv"


def _load_dataset(args: argparse.Namespace) -> RatingsDataset:
    path = Path(args.input)
    if not path.is_file():
        raise DataFormatError(f"{path}: no such file")
    fmt = _resolve_format(path, args.format)
    if fmt == "csv":
        return load_ratings_csv(path, _schema(args))
    ratings = load_matrix_market(path)
    return _dataset_from_sparse(ratings)


def _dataset_from_sparse(ratings: SparseRatings) -> RatingsDataset:
    coo = ratings.matrix.tocoo()
    samples = [
        RatingSample(int(i), int(j), float(v))
        for i, j, v in zip(coo.row, coo.col, coo.data)
    ]
    if not samples:
        raise EmptyDatasetError("matrix holds no ratings")
    return RatingsDataset(
        user_index={str(i + 1): i for i in range(ratings.m)},
        item_index={str(j + 1): j for j in range(ratings.n)},
        samples=samples,
        rating_min=ratings.rating_min,
        rating_max=ratings.rating_max,
    )


def _dataset_meta(path: Path, fmt: str, ratings: SparseRatings) -> dict:
    return {
        "path": str(path),
        "format": fmt,
        "users": ratings.m,
        "items": ratings.n,
        "ratings": ratings.nnz,
        "rating_min": ratings.rating_min,
        "rating_max": ratings.rating_max,
    }


def _svd_residual(A: SparseRatings, triplet: SvdTriplet) -> tuple[float, bool]:
    norm = np.sqrt(fro_norm_sq(A))
    if norm == 0.0:
        return 0.0, True
    if A.m * A.n <= MAX_DENSE_ELEMS:
        diff = A.to_dense() - triplet.reconstruct()
        return float(np.linalg.norm(diff) / norm), True
    energy = fro_norm_sq(A) - float(np.dot(triplet.s, triplet.s))
    return float(np.sqrt(max(energy, 0.0)) / norm), False


def _qb_residual(A: SparseRatings, state: QbState) -> tuple[float, bool]:
    norm = np.sqrt(fro_norm_sq(A))
    if norm == 0.0:
        return 0.0, True
    if A.m * A.n <= MAX_DENSE_ELEMS:
        diff = A.to_dense() - state.Q @ state.B
        return float(np.linalg.norm(diff) / norm), True
    return float(np.sqrt(max(state.err, 0.0)) / norm), False


def _write_singular_values(path: Path, values: np.ndarray) -> None:
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["index", "value"])
        for i, v in enumerate(values):
            writer.writerow([i, repr(float(v))])


def cmd_pca(args: argparse.Namespace) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    path = Path(args.input)
    fmt = _resolve_format(path, args.format)
    if fmt == "csv":
        ratings = dataset_to_sparse(_load_dataset(args))
    else:
        if not path.is_file():
            raise DataFormatError(f"{path}: no such file")
        ratings = load_matrix_market(path)
    t_ingest = time.perf_counter() - t0

    t1 = time.perf_counter()
    if args.rank is not None and args.power is not None:
        mode = "basic"
        triplet = basic_rsvd(
            ratings, args.rank, power=args.power, oversample=args.oversample,
            seed=args.seed,
        )
    elif args.rank is not None:
        mode = "adaptive-rank"
        triplet = adaptive_pca(
            ratings, FixedRank(args.rank), block_size=args.block,
            passes=args.passes, seed=args.seed,
        )
    elif args.power is not None:
        mode = "qb"
        triplet = None
    else:
        mode = "adaptive-tol"
        triplet = adaptive_pca(
            ratings, FrobTolerance(args.tol), block_size=args.block,
            passes=args.passes, seed=args.seed,
        )
    if mode == "qb":
        state = fixed_precision_qb(
            ratings, args.tol, block_size=args.block, power=args.power,
            seed=args.seed,
        )
        k = state.rank
        svals = scipy.linalg.svdvals(state.B) if k else np.empty(0)
        residual, exact = _qb_residual(ratings, state)
    else:
        k = triplet.k
        svals = triplet.s
        residual, exact = _svd_residual(ratings, triplet)
    t_factor = time.perf_counter() - t1

    _write_singular_values(out / "singular_values.csv", svals)
    report = RunReport(
        command="pca",
        seed=args.seed,
        dataset=_dataset_meta(path, fmt, ratings),
        params={
            "mode": mode,
            "rank": args.rank,
            "tol": args.tol,
            "block": args.block,
            "passes": args.passes,
            "power": args.power,
            "oversample": args.oversample,
        },
        result={
            "k": int(k),
            "residual_rel": residual,
            "residual_exact": exact,
            "singular_values": [float(v) for v in svals],
        },
        timings_s={"ingest": t_ingest, "factorize": t_factor},
    )
    (out / "report.json").write_text(report.to_json() + "\n")
    print(f"pca[{mode}]: k={k} residual={residual:.6f} out={out}")
    return EXIT_OK


def _parse_split(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise ValueError(f"--split needs three comma-separated fractions, got {text!r}")
    try:
        return tuple(float(p) for p in parts)  # type: ignore[return-value]
    except ValueError as exc:
        raise ValueError(f"bad --split value {text!r}") from exc


def _write_mae_trace(path: Path, trace) -> None:
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["k", "validation_mae", "cumulative_seconds"])
        for entry in trace:
            writer.writerow([entry.k, repr(entry.mae), f"{entry.seconds:.6f}"])


def cmd_recommend(args: argparse.Namespace) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    ds = _load_dataset(args)
    pruned_from = None
    if args.prune_min > 1:
        pruned_from = (ds.m, ds.n, ds.nnz)
        ds = prune_min_degree(ds, args.prune_min)
    fracs = _parse_split(args.split)
    spec = SplitSpec(
        train=fracs[0], validation=fracs[1], test=fracs[2], seed=args.seed
    )
    train, val, test = split(ds, spec)
    t_ingest = time.perf_counter() - t0

    t1 = time.perf_counter()
    factors, trace = auto_latent_factors(
        train,
        val,
        block_size=args.block,
        passes=args.passes,
        patience=args.patience,
        min_improvement=args.min_improvement,
        seed=args.seed,
    )
    t_factor = time.perf_counter() - t1

    t2 = time.perf_counter()
    test_mae = evaluate_mae(train, factors, test)
    t_eval = time.perf_counter() - t2

    best = min(trace, key=lambda e: e.mae)
    write_split_manifest(
        out / "split_manifest.txt", spec, (len(train.data), len(val), len(test))
    )
    _write_mae_trace(out / "mae_trace.csv", trace)
    fmt = _resolve_format(Path(args.input), args.format)
    meta = _dataset_meta(Path(args.input), fmt, train)
    meta["ratings"] = ds.nnz
    if pruned_from is not None:
        meta["before_prune"] = {
            "users": pruned_from[0], "items": pruned_from[1], "ratings": pruned_from[2],
        }
    report = RunReport(
        command="recommend",
        seed=args.seed,
        dataset=meta,
        params={
            "split": args.split,
            "prune_min": args.prune_min,
            "block": args.block,
            "passes": args.passes,
            "patience": args.patience,
            "min_improvement": args.min_improvement,
        },
        result={
            "k": int(factors.k),
            "mae_validation": float(best.mae),
            "mae_test": float(test_mae),
            "blocks_evaluated": len(trace),
            "train_ratings": len(train.data),
            "validation_ratings": len(val),
            "test_ratings": len(test),
        },
        timings_s={"ingest": t_ingest, "factorize": t_factor, "evaluate": t_eval},
    )
    (out / "report.json").write_text(report.to_json() + "\n")
    print(
        f"recommend: k={factors.k} validation_mae={best.mae:.4f} "
        f"test_mae={test_mae:.4f} out={out}"
    )
    return EXIT_OK


def _expand_cells(config: dict, config_dir: Path) -> list[tuple[str, list[str]]]:
    """Turn the sweep config into (cell name, argv) pairs.

    List-valued parameters fan out into a cartesian product; each concrete
    combination becomes one cell named after its varying values.
    """
    if not isinstance(config, dict) or "cells" not in config:
        raise DataFormatError("config must be a JSON object with a 'cells' list")
    cells = config["cells"]
    if not isinstance(cells, list) or not cells:
        raise DataFormatError("'cells' must be a nonempty list")
    out: list[tuple[str, list[str]]] = []
    for idx, cell in enumerate(cells):
        if not isinstance(cell, dict):
            raise DataFormatError(f"cell {idx} is not an object")
        cell = dict(cell)
        base = str(cell.pop("name", f"cell{idx}"))
        command = cell.pop("command", None)
        if command not in ("pca", "recommend"):
            raise DataFormatError(f"cell {base!r}: command must be pca or recommend")
        sweep_keys = [k for k, v in cell.items() if isinstance(v, list)]
        fixed = {k: v for k, v in cell.items() if not isinstance(v, list)}
        combos = itertools.product(*(cell[k] for k in sweep_keys)) if sweep_keys else [()]
        for combo in combos:
            params = dict(fixed)
            params.update(dict(zip(sweep_keys, combo)))
            name = base
            if sweep_keys:
                name += "/" + ",".join(f"{k}={v}" for k, v in zip(sweep_keys, combo))
            argv = [command]
            for key, value in params.items():
                if key == "input" and not Path(str(value)).is_absolute():
                    value = config_dir / str(value)
                flag = "--" + key.replace("_", "-")
                if isinstance(value, bool):
                    if value:
                        argv.append(flag)
                else:
                    argv.extend([flag, str(value)])
            out.append((name, argv))
    return out


def cmd_bench(args: argparse.Namespace) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config_path = Path(args.config)
    if not config_path.is_file():
        raise DataFormatError(f"{config_path}: no such file")
    try:
        config = json.loads(config_path.read_text())
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{config_path}: invalid JSON: {exc}") from exc
    cells = _expand_cells(config, config_path.parent)
    rows = []
    n_ok = 0
    for name, argv in cells:
        cell_dir = out / "cells" / name.replace("/", "_")
        cell_argv = argv + ["--out", str(cell_dir)]
        t0 = time.perf_counter()
        try:
            code = main(cell_argv)
        except SystemExit as exc:
            code = int(exc.code or 0)
        elapsed = time.perf_counter() - t0
        row = {
            "cell": name,
            "status": "ok" if code == 0 else "failed",
            "exit_code": code,
            "seconds": f"{elapsed:.3f}",
            "k": "",
            "residual_rel": "",
            "mae_test": "",
        }
        report_path = cell_dir / "report.json"
        if code == 0 and report_path.is_file():
            result = RunReport.from_json(report_path.read_text()).result
            row["k"] = result.get("k", "")
            row["residual_rel"] = result.get("residual_rel", "")
            row["mae_test"] = result.get("mae_test", "")
            n_ok += 1
        rows.append(row)
    fields = ["cell", "status", "exit_code", "seconds", "k", "residual_rel", "mae_test"]
    with (out / "aggregate.csv").open("w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)
    print(f"bench: {len(rows)} cells, {n_ok} ok, {len(rows) - n_ok} failed, out={out}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "pca":
            return cmd_pca(args)
        if args.command == "recommend":
            return cmd_recommend(args)
        return cmd_bench(args)
    except (RankDeficientError, NearSingularError, RankExhaustedError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataFormatError, EmptyDatasetError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
