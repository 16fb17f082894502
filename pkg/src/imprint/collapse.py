"""Variability-collapse statistics for labeled embedding sets.

The NC1 score is trace(sigma_w @ pinv(sigma_b)) / C, where sigma_w is the
within-class covariance (mean of centered outer products over samples),
sigma_b is the covariance of the class means around the global mean (mean
over classes), and the pseudo-inverse is computed by SVD. A score near zero
means the samples sit tightly at their class means; multi-modal or noisy
classes push it up. By default every row is L2-normalized first so the score
is scale-free.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import EmbeddingSet
from .normalize import l2_normalize_rows

# Singular values of sigma_b below max(dim, C) * sigma_max * PINV_RTOL are
# treated as zero in the pseudo-inverse.
PINV_RTOL = 1e-12


@dataclass(frozen=True)
class CollapseStats:
    """Global mean, class means, the two covariance matrices, and NC1."""

    global_mean: np.ndarray
    class_means: np.ndarray
    sigma_w: np.ndarray
    sigma_b: np.ndarray
    nc1: float


def _pinv_psd(matrix: np.ndarray, class_count: int) -> np.ndarray:
    u, s, vt = np.linalg.svd(matrix)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros_like(matrix)
    cutoff = max(matrix.shape[0], class_count) * s[0] * PINV_RTOL
    inv = np.where(s > cutoff, 1.0, 0.0) / np.where(s > cutoff, s, 1.0)
    return (vt.T * inv) @ u.T


def _collapse_stats(
    vectors: np.ndarray, labels: np.ndarray, class_count: int, class_weights: np.ndarray
) -> CollapseStats:
    dim = vectors.shape[1]
    class_means = np.empty((class_count, dim))
    sigma_w = np.zeros((dim, dim))
    for c in range(class_count):
        rows = vectors[labels == c]
        class_means[c] = rows.mean(axis=0)
        centered = rows - class_means[c]
        sigma_w += class_weights[c] * (centered.T @ centered) / rows.shape[0]
    global_mean = class_weights @ class_means
    centered_means = class_means - global_mean
    sigma_b = (centered_means.T @ centered_means) / class_count
    nc1 = float(np.trace(sigma_w @ _pinv_psd(sigma_b, class_count)) / class_count)
    return CollapseStats(global_mean, class_means, sigma_w, sigma_b, nc1)


def _prepared_vectors(dataset: EmbeddingSet, pre_l2: bool) -> np.ndarray:
    if dataset.class_count < 2:
        raise ValueError("collapse statistics need at least 2 classes")
    if pre_l2:
        return l2_normalize_rows(dataset.vectors)
    return dataset.vectors


def compute_nc1(dataset: EmbeddingSet, pre_l2: bool = True) -> CollapseStats:
    """NC1 for a balanced set (equal per-class sample counts).

    With ``pre_l2`` (the default) all embeddings are L2-normalized before any
    statistic is computed; a zero vector is then an error. Unequal class
    counts are rejected, use :func:`imbalanced_nc1` for those.
    """
    counts = dataset.per_class_counts()
    if np.unique(counts).size != 1:
        raise ValueError(
            "per-class sample counts are unequal; use imbalanced_nc1 instead"
        )
    vectors = _prepared_vectors(dataset, pre_l2)
    weights = counts / dataset.n_total
    return _collapse_stats(vectors, dataset.labels, dataset.class_count, weights)


def imbalanced_nc1(dataset: EmbeddingSet, pre_l2: bool = True) -> CollapseStats:
    """NC1 generalized to unequal class sizes.

    Every class contributes with equal weight: sigma_w averages the per-class
    (per-sample) covariances over classes, and the global mean is the mean of
    the class means. Duplicating all samples of one class therefore leaves
    the score unchanged, and balanced input reproduces :func:`compute_nc1`
    exactly.
    """
    vectors = _prepared_vectors(dataset, pre_l2)
    weights = np.full(dataset.class_count, 1.0 / dataset.class_count)
    return _collapse_stats(vectors, dataset.labels, dataset.class_count, weights)


def rank_of_sigma_b(stats: CollapseStats, class_count: int) -> int:
    """Numerical rank of sigma_b under the same cutoff as the pseudo-inverse."""
    s = np.linalg.svd(stats.sigma_b, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    cutoff = max(stats.sigma_b.shape[0], class_count) * s[0] * PINV_RTOL
    return int(np.sum(s > cutoff))
