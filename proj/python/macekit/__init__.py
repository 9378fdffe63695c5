"""Embedding dissimilarity (MACE) and detector generalization tools."""

from ._core import (
    GaussianMoments,
    MaceScore,
    MacekitError,
    TestResult,
    fit_gaussian,
    frechet_distance,
    iou,
    mace_between,
    matrix_sqrt_psd,
    median_filter,
    non_inferiority,
    pca_2d,
    percentile_ci,
    quantile,
    read_embeddings,
    rgb_to_hsv,
    superiority,
    tpr_at_fapm,
    tsne_2d,
    write_embeddings,
    z_test_two_sided,
)

__all__ = [
    "GaussianMoments",
    "MaceScore",
    "MacekitError",
    "TestResult",
    "fit_gaussian",
    "frechet_distance",
    "iou",
    "mace_between",
    "matrix_sqrt_psd",
    "median_filter",
    "non_inferiority",
    "pca_2d",
    "percentile_ci",
    "quantile",
    "read_embeddings",
    "rgb_to_hsv",
    "superiority",
    "tpr_at_fapm",
    "tsne_2d",
    "write_embeddings",
    "z_test_two_sided",
]
