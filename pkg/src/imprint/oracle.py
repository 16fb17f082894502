"""Closed-form least-squares reference weights.

This is deliberately not an imprinting strategy: the weights are built from
statistics across all classes jointly (total covariance plus global mean) and
serve as a supervised upper reference in evaluations. For that reason the
oracle lives outside the GenStrategy enumeration and carries its own type.

Weight row for class c:  class_mean_c^T @ inv(sigma_t + g g^T + lambda I) / C
with sigma_t the population total covariance, g the global mean, and lambda a
ridge term. The multi-proxy variant first splits every class into k clusters
and solves the same system once over all k*C proxy classes. No normalization
is applied anywhere in this pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import EmbeddingSet
from .generate import kmeans
from .head import AggMode, ClassifierHead
from .seeding import derive_seed

DEFAULT_RIDGE_LAMBDA = 1e-4


@dataclass(frozen=True)
class OracleWeights:
    """Ridge least-squares weights: k rows per class, grouped by class."""

    weights: np.ndarray
    proxy_class: np.ndarray
    ridge_lambda: float
    k: int

    def __post_init__(self):
        weights = np.ascontiguousarray(np.asarray(self.weights, dtype=np.float64))
        owners = np.ascontiguousarray(np.asarray(self.proxy_class, dtype=np.int64))
        if weights.ndim != 2 or owners.shape != (weights.shape[0],):
            raise ValueError("weights and proxy_class shapes are inconsistent")
        if self.ridge_lambda < 0:
            raise ValueError("lambda must be >= 0")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "proxy_class", owners)

    @property
    def class_count(self) -> int:
        return int(self.proxy_class.max()) + 1

    def as_head(self) -> ClassifierHead:
        """View as a max-aggregation head (no inference normalization)."""
        return ClassifierHead(
            self.weights,
            self.proxy_class,
            self.class_count,
            norm_inf="none",
            agg=AggMode("max"),
        )


def _total_statistics(dataset: EmbeddingSet) -> tuple[np.ndarray, np.ndarray]:
    x = dataset.vectors
    global_mean = x.mean(axis=0)
    centered = x - global_mean
    sigma_t = (centered.T @ centered) / x.shape[0]
    return sigma_t, global_mean


def _solve_weights(
    sigma_t: np.ndarray,
    global_mean: np.ndarray,
    proxy_means: np.ndarray,
    ridge_lambda: float,
) -> np.ndarray:
    """Solve (sigma_t + g g^T + lambda I) X = M and scale by the class count.

    Solved as a linear system rather than an explicit inverse. A singular
    system (possible at lambda == 0) is reported as a ValueError.
    """
    dim = sigma_t.shape[0]
    system = sigma_t + np.outer(global_mean, global_mean) + ridge_lambda * np.eye(dim)
    try:
        solution = np.linalg.solve(system, proxy_means.T)
    except np.linalg.LinAlgError as exc:
        raise ValueError(
            f"singular least-squares system (lambda={ridge_lambda}): {exc}"
        ) from None
    return solution.T / proxy_means.shape[0]


def least_squares_weights(
    dataset: EmbeddingSet, ridge_lambda: float = DEFAULT_RIDGE_LAMBDA
) -> OracleWeights:
    """Single weight vector per class from the closed-form ridge solution."""
    if dataset.class_count < 2:
        raise ValueError("least-squares weights need at least 2 classes")
    if ridge_lambda < 0:
        raise ValueError("lambda must be >= 0")
    sigma_t, global_mean = _total_statistics(dataset)
    class_means = np.stack(
        [dataset.class_vectors(c).mean(axis=0) for c in range(dataset.class_count)]
    )
    weights = _solve_weights(sigma_t, global_mean, class_means, ridge_lambda)
    return OracleWeights(
        weights, np.arange(dataset.class_count, dtype=np.int64), ridge_lambda, 1
    )


def k_least_squares(
    dataset: EmbeddingSet,
    k: int,
    ridge_lambda: float = DEFAULT_RIDGE_LAMBDA,
    seed: int = 0,
) -> OracleWeights:
    """Multi-proxy least squares: cluster every class into k proxy classes,
    then solve the joint system once over all k*C proxy classes.

    k = 1 reduces exactly to :func:`least_squares_weights`. Rows are grouped
    by their original class, cluster-major within a class.
    """
    if dataset.class_count < 2:
        raise ValueError("least-squares weights need at least 2 classes")
    if k < 1:
        raise ValueError("k must be >= 1")
    min_count = int(dataset.per_class_counts().min())
    if k > min_count:
        raise ValueError(f"k={k} exceeds the smallest per-class count {min_count}")
    sigma_t, global_mean = _total_statistics(dataset)
    proxy_means = []
    owners = []
    for c in range(dataset.class_count):
        centers, _, _ = kmeans(dataset.class_vectors(c), k, derive_seed(seed, c))
        proxy_means.append(centers)
        owners.append(np.full(k, c, dtype=np.int64))
    weights = _solve_weights(
        sigma_t, global_mean, np.vstack(proxy_means), ridge_lambda
    )
    return OracleWeights(weights, np.concatenate(owners), ridge_lambda, k)


def oracle_predict(weights: OracleWeights, queries: np.ndarray) -> np.ndarray:
    """Max aggregation over the weight rows; returns the owning class ids."""
    from .head import predict_batch

    return predict_batch(weights.as_head(), queries)
