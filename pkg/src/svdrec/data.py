"""Loading, pruning, and splitting of rating datasets.

Two on-disk formats are understood: delimited rating files (one
user, item, rating triple per line) and Matrix Market coordinate files.
Raw user and item identifiers are mapped to dense indices in order of
first appearance, which keeps loading deterministic for a given file.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .sparse import SparseRatings


class DataFormatError(ValueError):
    """Input file violates the expected format."""


class EmptyDatasetError(ValueError):
    """An operation would leave or found no ratings."""


class RatingSample(NamedTuple):
    """(user, item, rating) triple with dense indices."""

    user: int
    item: int
    rating: float


@dataclass(frozen=True)
class CsvSchema:
    """Column layout of a delimited ratings file."""

    delimiter: str = ","
    user_col: int = 0
    item_col: int = 1
    rating_col: int = 2
    has_header: bool = True

    def __post_init__(self) -> None:
        cols = (self.user_col, self.item_col, self.rating_col)
        if len(set(cols)) != 3 or min(cols) < 0:
            raise ValueError("user, item, rating columns must be distinct and >= 0")


@dataclass
class RatingsDataset:
    """Ratings in dense-index form plus the raw-identifier mappings."""

    user_index: dict[str, int]
    item_index: dict[str, int]
    samples: list[RatingSample]
    rating_min: float
    rating_max: float
    n_duplicates: int = 0

    @property
    def m(self) -> int:
        return len(self.user_index)

    @property
    def n(self) -> int:
        return len(self.item_index)

    @property
    def nnz(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class SplitSpec:
    """Train/validation/test fractions plus the shuffle seed."""

    train: float = 0.9
    validation: float = 0.05
    test: float = 0.05
    seed: int = 0

    def __post_init__(self) -> None:
        parts = (self.train, self.validation, self.test)
        if min(parts) <= 0.0:
            raise ValueError("all three fractions must be positive")
        if abs(sum(parts) - 1.0) > 1e-12:
            raise ValueError(f"fractions must sum to 1, got {sum(parts)}")


def load_ratings_csv(path: str | Path, schema: CsvSchema | None = None) -> RatingsDataset:
    """Read a delimited ratings file into dense-index form.

    Duplicate (user, item) pairs keep the last value seen and are counted
    in ``n_duplicates``.  A malformed row raises
    :class:`DataFormatError` naming the line; a file with no data rows
    raises :class:`EmptyDatasetError`.
    """
    schema = schema or CsvSchema()
    path = Path(path)
    need = max(schema.user_col, schema.item_col, schema.rating_col) + 1
    user_index: dict[str, int] = {}
    item_index: dict[str, int] = {}
    cells: dict[tuple[int, int], float] = {}
    n_dup = 0
    with path.open(newline="") as handle:
        reader = csv.reader(handle, delimiter=schema.delimiter)
        for lineno, row in enumerate(reader, start=1):
            if lineno == 1 and schema.has_header:
                continue
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) < need:
                raise DataFormatError(
                    f"{path}: line {lineno}: expected at least {need} fields, got {len(row)}"
                )
            raw_user = row[schema.user_col].strip()
            raw_item = row[schema.item_col].strip()
            try:
                rating = float(row[schema.rating_col])
            except ValueError as exc:
                raise DataFormatError(
                    f"{path}: line {lineno}: bad rating {row[schema.rating_col]!r}"
                ) from exc
            if not np.isfinite(rating):
                raise DataFormatError(f"{path}: line {lineno}: non-finite rating")
            if not raw_user or not raw_item:
                raise DataFormatError(f"{path}: line {lineno}: empty identifier")
            u = user_index.setdefault(raw_user, len(user_index))
            i = item_index.setdefault(raw_item, len(item_index))
            if (u, i) in cells:
                n_dup += 1
            cells[(u, i)] = rating
    if not cells:
        raise EmptyDatasetError(f"{path}: no ratings found")
    samples = [RatingSample(u, i, r) for (u, i), r in cells.items()]
    values = [s.rating for s in samples]
    return RatingsDataset(
        user_index=user_index,
        item_index=item_index,
        samples=samples,
        rating_min=min(values),
        rating_max=max(values),
        n_duplicates=n_dup,
    )


def prune_min_degree(ds: RatingsDataset, min_count: int) -> RatingsDataset:
    """Drop users and items with fewer than ``min_count`` ratings.

    Removal is iterated to a fixed point, since dropping an item can push a
    user below the threshold and vice versa.  Surviving identifiers are
    reindexed densely, preserving their relative order.  Raises
    :class:`EmptyDatasetError` when nothing survives.
    """
    if min_count < 1:
        raise ValueError("min_count must be at least 1")
    samples = ds.samples
    while True:
        user_deg = np.zeros(ds.m, dtype=np.int64)
        item_deg = np.zeros(ds.n, dtype=np.int64)
        for s in samples:
            user_deg[s.user] += 1
            item_deg[s.item] += 1
        kept = [
            s
            for s in samples
            if user_deg[s.user] >= min_count and item_deg[s.item] >= min_count
        ]
        if len(kept) == len(samples):
            break
        samples = kept
        if not samples:
            raise EmptyDatasetError(f"pruning at min_count={min_count} removed everything")
    if len(samples) == len(ds.samples):
        return ds
    live_users = sorted({s.user for s in samples})
    live_items = sorted({s.item for s in samples})
    user_map = {old: new for new, old in enumerate(live_users)}
    item_map = {old: new for new, old in enumerate(live_items)}
    inv_user = {v: k for k, v in ds.user_index.items()}
    inv_item = {v: k for k, v in ds.item_index.items()}
    new_samples = [
        RatingSample(user_map[s.user], item_map[s.item], s.rating) for s in samples
    ]
    values = [s.rating for s in new_samples]
    return RatingsDataset(
        user_index={inv_user[old]: new for old, new in user_map.items()},
        item_index={inv_item[old]: new for old, new in item_map.items()},
        samples=new_samples,
        rating_min=min(values),
        rating_max=max(values),
        n_duplicates=ds.n_duplicates,
    )


def split(
    ds: RatingsDataset, spec: SplitSpec
) -> tuple[SparseRatings, list[RatingSample], list[RatingSample]]:
    """Shuffle ratings and split into a train matrix plus two held-out lists.

    Validation and test sizes are the fractions rounded to the nearest
    sample; training takes the remainder.  The training matrix keeps the
    full (users, items) shape of the dataset, so held-out indices stay
    valid; users or items whose every rating landed in a held-out part
    simply have empty rows or columns.  A part that rounds to zero samples
    raises ValueError.
    """
    total = ds.nnz
    n_val = round(spec.validation * total)
    n_test = round(spec.test * total)
    n_train = total - n_val - n_test
    if min(n_train, n_val, n_test) <= 0:
        raise ValueError(
            f"split of {total} samples gives sizes "
            f"({n_train}, {n_val}, {n_test}); every part must be nonempty"
        )
    order = np.random.default_rng(spec.seed).permutation(total)
    shuffled = [ds.samples[i] for i in order]
    train = shuffled[:n_train]
    val = shuffled[n_train : n_train + n_val]
    test = shuffled[n_train + n_val :]
    rows = np.array([s.user for s in train], dtype=np.int64)
    cols = np.array([s.item for s in train], dtype=np.int64)
    vals = np.array([s.rating for s in train], dtype=np.float64)
    matrix = SparseRatings.from_coo(
        rows, cols, vals, shape=(ds.m, ds.n), bounds=(ds.rating_min, ds.rating_max)
    )
    return matrix, val, test


def load_matrix_market(path: str | Path) -> SparseRatings:
    """Read a Matrix Market coordinate file of real or integer entries.

    Only the general symmetry variant is accepted.  Indices are 1-based in
    the file; out-of-bounds entries raise :class:`DataFormatError`.
    Rating bounds are the observed value range.
    """
    path = Path(path)
    with path.open() as handle:
        banner = handle.readline()
        if not banner.startswith("%%MatrixMarket"):
            raise DataFormatError(f"{path}: missing MatrixMarket banner")
        fields = banner.strip().split()
        if len(fields) != 5:
            raise DataFormatError(f"{path}: malformed banner: {banner.strip()!r}")
        _, obj, fmt, field, symmetry = (f.lower() for f in fields)
        if obj != "matrix" or fmt != "coordinate":
            raise DataFormatError(f"{path}: only coordinate matrices are supported")
        if field not in ("real", "integer"):
            raise DataFormatError(f"{path}: unsupported field type {field!r}")
        if symmetry != "general":
            raise DataFormatError(f"{path}: unsupported symmetry {symmetry!r}")
        size_line = None
        lineno = 1
        for line in handle:
            lineno += 1
            stripped = line.strip()
            if not stripped or stripped.startswith("%"):
                continue
            size_line = stripped
            break
        if size_line is None:
            raise DataFormatError(f"{path}: missing size line")
        parts = size_line.split()
        if len(parts) != 3:
            raise DataFormatError(f"{path}: line {lineno}: bad size line")
        try:
            m, n, nnz = (int(p) for p in parts)
        except ValueError as exc:
            raise DataFormatError(f"{path}: line {lineno}: bad size line") from exc
        if m < 0 or n < 0 or nnz < 0:
            raise DataFormatError(f"{path}: line {lineno}: negative dimension")
        rows = np.empty(nnz, dtype=np.int64)
        cols = np.empty(nnz, dtype=np.int64)
        vals = np.empty(nnz, dtype=np.float64)
        count = 0
        for line in handle:
            lineno += 1
            stripped = line.strip()
            if not stripped or stripped.startswith("%"):
                continue
            parts = stripped.split()
            if len(parts) != 3:
                raise DataFormatError(
                    f"{path}: line {lineno}: expected 'row col value'"
                )
            if count >= nnz:
                raise DataFormatError(f"{path}: more entries than declared ({nnz})")
            try:
                i, j = int(parts[0]), int(parts[1])
                v = float(parts[2])
            except ValueError as exc:
                raise DataFormatError(f"{path}: line {lineno}: bad entry") from exc
            if not (1 <= i <= m and 1 <= j <= n):
                raise DataFormatError(
                    f"{path}: line {lineno}: entry ({i}, {j}) outside {m} x {n}"
                )
            rows[count] = i - 1
            cols[count] = j - 1
            vals[count] = v
            count += 1
        if count != nnz:
            raise DataFormatError(f"{path}: declared {nnz} entries, found {count}")
    return SparseRatings.from_coo(rows, cols, vals, shape=(m, n))


def save_matrix_market(path: str | Path, ratings: SparseRatings) -> None:
    """Write ratings as a Matrix Market coordinate file (lossless round trip)."""
    path = Path(path)
    coo = ratings.matrix.tocoo()
    with path.open("w") as handle:
        handle.write("%%MatrixMarket matrix coordinate real general\n")
        handle.write(f"{ratings.m} {ratings.n} {ratings.nnz}\n")
        for i, j, v in zip(coo.row, coo.col, coo.data):
            handle.write(f"{i + 1} {j + 1} {float(v)!r}\n")


def dataset_to_sparse(ds: RatingsDataset) -> SparseRatings:
    """All of a dataset's ratings as one sparse matrix."""
    rows = np.array([s.user for s in ds.samples], dtype=np.int64)
    cols = np.array([s.item for s in ds.samples], dtype=np.int64)
    vals = np.array([s.rating for s in ds.samples], dtype=np.float64)
    return SparseRatings.from_coo(
        rows, cols, vals, shape=(ds.m, ds.n), bounds=(ds.rating_min, ds.rating_max)
    )


def write_split_manifest(
    path: str | Path,
    spec: SplitSpec,
    counts: tuple[int, int, int],
) -> None:
    """Record how a split was produced, for reproducibility audits."""
    path = Path(path)
    n_train, n_val, n_test = counts
    lines = [
        f"seed = {spec.seed}",
        f"fractions = {spec.train},{spec.validation},{spec.test}",
        f"train = {n_train}",
        f"validation = {n_val}",
        f"test = {n_test}",
        f"total = {n_train + n_val + n_test}",
    ]
    path.write_text("\n".join(lines) + "\n")
