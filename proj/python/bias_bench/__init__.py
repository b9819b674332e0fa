"""Bias-type classification benchmark over pre-computed sentence embeddings."""

from ._core import (
    BiasBenchError,
    ConfigError,
    DataError,
    FormatError,
    KnnModel,
    NumericError,
    __version__,
    accuracy,
    bonferroni,
    derive_seed,
    euclidean,
    evaluate,
    neighbor_purity,
    read_embeddings,
    regularized_incomplete_beta,
    render_report,
    run_tsne,
    stratified_split,
    welch_t_test,
    write_embeddings,
)

__all__ = [
    "BiasBenchError",
    "ConfigError",
    "DataError",
    "FormatError",
    "KnnModel",
    "NumericError",
    "__version__",
    "accuracy",
    "bonferroni",
    "derive_seed",
    "euclidean",
    "evaluate",
    "neighbor_purity",
    "read_embeddings",
    "regularized_incomplete_beta",
    "render_report",
    "run_tsne",
    "stratified_split",
    "welch_t_test",
    "write_embeddings",
]
