"""Randomized low-rank factorization and latent-factor collaborative filtering."""

from .cf import (
    BlockEval,
    LatentFactors,
    Prediction,
    ValidationMae,
    auto_latent_factors,
    evaluate_mae,
    latent_from_qb,
    mae,
    predict_rating,
)
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
    save_matrix_market,
    split,
    write_split_manifest,
)
from .linalg import (
    EigSvd,
    GaussianStream,
    NearSingularError,
    RankDeficientError,
    SvdTriplet,
    eig_svd,
    fro_norm_sq,
    gaussian_matrix,
    lu_lower_basis,
    orthonormal_basis,
    sparse_dense_mul,
)
from .rsvd import (
    FixedRank,
    FrobTolerance,
    QbState,
    RankExhaustedError,
    TerminationCriterion,
    adaptive_pca,
    basic_rsvd,
    fixed_precision_qb,
    qb_pass_blocks,
    qb_power_blocks,
)
from .sparse import SparseRatings

__version__ = "0.1.0"

__all__ = [
    "BlockEval",
    "CsvSchema",
    "DataFormatError",
    "EigSvd",
    "EmptyDatasetError",
    "FixedRank",
    "FrobTolerance",
    "GaussianStream",
    "LatentFactors",
    "NearSingularError",
    "Prediction",
    "QbState",
    "RankDeficientError",
    "RankExhaustedError",
    "RatingSample",
    "RatingsDataset",
    "SparseRatings",
    "SplitSpec",
    "SvdTriplet",
    "TerminationCriterion",
    "ValidationMae",
    "adaptive_pca",
    "auto_latent_factors",
    "basic_rsvd",
    "dataset_to_sparse",
    "eig_svd",
    "evaluate_mae",
    "fixed_precision_qb",
    "fro_norm_sq",
    "gaussian_matrix",
    "latent_from_qb",
    "load_matrix_market",
    "load_ratings_csv",
    "lu_lower_basis",
    "mae",
    "orthonormal_basis",
    "predict_rating",
    "prune_min_degree",
    "qb_pass_blocks",
    "qb_power_blocks",
    "save_matrix_market",
    "sparse_dense_mul",
    "split",
    "write_split_manifest",
]
