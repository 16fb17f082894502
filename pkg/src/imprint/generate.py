"""Per-class proxy generation strategies.

Every strategy maps one class's embedding matrix (n rows, dim columns) to a
proxy matrix and never looks across classes. Only ``mean`` and ``k_means``
may produce rows that are not among the input samples; the other strategies
select existing rows. All strategies are deterministic functions of
(input, k, seed).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .seeding import make_rng, spawn_rngs

GEN_VARIANTS = ("all", "k_random", "mean", "k_means", "k_medoids", "k_cov_max", "k_fps")

KMEANS_RESTARTS = 10
KMEANS_MAX_ITER = 300


@dataclass(frozen=True)
class GenStrategy:
    """One proxy-generation choice: variant plus proxy count and seed.

    ``k`` is ignored by ``all`` and ``mean``; ``seed`` only matters for the
    stochastic variants (k_random, k_means, k_medoids, k_fps).
    """

    variant: str
    k: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.variant not in GEN_VARIANTS:
            raise ValueError(f"unknown generation strategy {self.variant!r}")
        if self.k < 1:
            raise ValueError("k must be >= 1")


def _check_class_matrix(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("class embeddings must be a non-empty 2-D matrix")
    return x


def _check_k(k: int, n: int) -> None:
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must satisfy 1 <= k <= {n} (per-class sample count)")


def gen_all(class_embeddings: np.ndarray) -> np.ndarray:
    """Every embedding becomes a proxy, in input order."""
    return _check_class_matrix(class_embeddings).copy()


def gen_mean(class_embeddings: np.ndarray) -> np.ndarray:
    """Single proxy: the arithmetic mean of the class embeddings."""
    x = _check_class_matrix(class_embeddings)
    return x.mean(axis=0, keepdims=True)


def _sq_dists(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    # ||x - c||^2 via the inner-product expansion; clip tiny negatives.
    d2 = (
        np.sum(x * x, axis=1)[:, None]
        + np.sum(centers * centers, axis=1)[None, :]
        - 2.0 * (x @ centers.T)
    )
    return np.maximum(d2, 0.0)


def _kmeans_pp_indices(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """D^2-weighted seeding; returns k row indices (repeats possible only if
    the remaining mass is zero, i.e. duplicate points)."""
    n = x.shape[0]
    chosen = np.empty(k, dtype=np.int64)
    chosen[0] = rng.integers(n)
    d2 = np.sum((x - x[chosen[0]]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total > 0.0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            idx = int(rng.integers(n))
        chosen[j] = idx
        d2 = np.minimum(d2, np.sum((x - x[idx]) ** 2, axis=1))
    return chosen


def _repair_empty(labels: np.ndarray, d2: np.ndarray, k: int) -> None:
    """Give each empty cluster the point farthest from its assigned center.

    Points in singleton clusters are not eligible donors, so no repaired
    cluster is emptied again. Feasible because k <= n.
    """
    counts = np.bincount(labels, minlength=k)
    if not np.any(counts == 0):
        return
    cost = d2[np.arange(labels.size), labels].astype(np.float64)
    for j in range(k):
        if counts[j] > 0:
            continue
        eligible = counts[labels] > 1
        candidate_cost = np.where(eligible, cost, -1.0)
        far = int(np.argmax(candidate_cost))
        counts[labels[far]] -= 1
        labels[far] = j
        counts[j] = 1
        cost[far] = -1.0


def _lloyd_once(
    x: np.ndarray, k: int, rng: np.random.Generator, max_iter: int
) -> tuple[np.ndarray, np.ndarray, float]:
    centers = x[_kmeans_pp_indices(x, k, rng)].copy()
    labels: np.ndarray | None = None
    for _ in range(max_iter):
        d2 = _sq_dists(x, centers)
        new_labels = np.argmin(d2, axis=1)
        _repair_empty(new_labels, d2, k)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        centers = np.stack([x[labels == j].mean(axis=0) for j in range(k)])
    assert labels is not None
    inertia = float(np.sum((x - centers[labels]) ** 2))
    return centers, labels, inertia


def kmeans(
    x: np.ndarray,
    k: int,
    seed: int,
    restarts: int = KMEANS_RESTARTS,
    max_iter: int = KMEANS_MAX_ITER,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Lloyd's algorithm with D^2 seeding and multiple restarts.

    Runs ``restarts`` independently seeded attempts to an assignment fixed
    point (or ``max_iter`` sweeps) and keeps the one with the smallest final
    inertia. Returns (centers, assignment labels, inertia); centers are the
    means of their final assignments.
    """
    x = _check_class_matrix(x)
    _check_k(k, x.shape[0])
    best: tuple[np.ndarray, np.ndarray, float] | None = None
    for rng in spawn_rngs(seed, restarts):
        result = _lloyd_once(x, k, rng, max_iter)
        if best is None or result[2] < best[2]:
            best = result
    assert best is not None
    return best


def gen_k_means(class_embeddings: np.ndarray, k: int, seed: int) -> np.ndarray:
    """k cluster centers from :func:`kmeans`; k=1 reduces to the mean."""
    centers, _, _ = kmeans(class_embeddings, k, seed)
    return centers


def _kmedoids_once(
    x: np.ndarray, k: int, rng: np.random.Generator, max_iter: int
) -> tuple[np.ndarray, float]:
    medoids = _kmeans_pp_indices(x, k, rng).copy()
    labels: np.ndarray | None = None
    for _ in range(max_iter):
        d2 = _sq_dists(x, x[medoids])
        new_labels = np.argmin(d2, axis=1)
        _repair_empty(new_labels, d2, k)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            members = np.flatnonzero(labels == j)
            within = _sq_dists(x[members], x[members]).sum(axis=1)
            medoids[j] = members[int(np.argmin(within))]
    assert labels is not None
    cost = float(np.sum((x - x[medoids][labels]) ** 2))
    return medoids, cost


def gen_k_medoids(class_embeddings: np.ndarray, k: int, seed: int) -> np.ndarray:
    """Alternating k-medoids on squared Euclidean distance.

    Medoids are always actual input rows. Uses the same seeding and restart
    scheme as :func:`kmeans`.
    """
    x = _check_class_matrix(class_embeddings)
    _check_k(k, x.shape[0])
    best: tuple[np.ndarray, float] | None = None
    for rng in spawn_rngs(seed, KMEANS_RESTARTS):
        result = _kmedoids_once(x, k, rng, KMEANS_MAX_ITER)
        if best is None or result[1] < best[1]:
            best = result
    assert best is not None
    return x[best[0]].copy()


def gen_k_cov_max(class_embeddings: np.ndarray, k: int) -> np.ndarray:
    """Top-k rows by column sum of the sample-by-sample covariance matrix.

    Each embedding row is treated as a variable observed over its coordinates
    (unbiased estimator, divisor dim-1); rows with the largest covariance
    column sums are selected, descending, ties broken by lower row index.
    """
    x = _check_class_matrix(class_embeddings)
    n = x.shape[0]
    if n < 2:
        raise ValueError("covariance selection needs at least 2 samples")
    if x.shape[1] < 2:
        raise ValueError("covariance selection needs at least 2 dimensions")
    _check_k(k, n)
    scores = np.cov(x).sum(axis=0)
    order = np.argsort(-scores, kind="stable")
    return x[order[:k]].copy()


def gen_k_fps(class_embeddings: np.ndarray, k: int, seed: int) -> np.ndarray:
    """Farthest-point sampling, starting from a seeded random row.

    Each subsequent proxy maximizes the minimum Euclidean distance to the
    already selected set; ties go to the lower row index.
    """
    x = _check_class_matrix(class_embeddings)
    n = x.shape[0]
    _check_k(k, n)
    rng = make_rng(seed)
    selected = np.empty(k, dtype=np.int64)
    selected[0] = rng.integers(n)
    dist = np.linalg.norm(x - x[selected[0]], axis=1)
    dist[selected[0]] = -1.0
    for j in range(1, k):
        far = int(np.argmax(dist))
        selected[j] = far
        dist = np.minimum(dist, np.linalg.norm(x - x[far], axis=1))
        dist[selected[: j + 1]] = -1.0
    return x[selected].copy()


def gen_k_random(class_embeddings: np.ndarray, k: int, seed: int) -> np.ndarray:
    """k rows drawn uniformly without replacement."""
    x = _check_class_matrix(class_embeddings)
    _check_k(k, x.shape[0])
    idx = make_rng(seed).choice(x.shape[0], size=k, replace=False)
    return x[idx].copy()


def generate_proxies(class_embeddings: np.ndarray, strategy: GenStrategy) -> np.ndarray:
    """Dispatch to the strategy's generator."""
    if strategy.variant == "all":
        return gen_all(class_embeddings)
    if strategy.variant == "mean":
        return gen_mean(class_embeddings)
    if strategy.variant == "k_means":
        return gen_k_means(class_embeddings, strategy.k, strategy.seed)
    if strategy.variant == "k_medoids":
        return gen_k_medoids(class_embeddings, strategy.k, strategy.seed)
    if strategy.variant == "k_cov_max":
        return gen_k_cov_max(class_embeddings, strategy.k)
    if strategy.variant == "k_fps":
        return gen_k_fps(class_embeddings, strategy.k, strategy.seed)
    if strategy.variant == "k_random":
        return gen_k_random(class_embeddings, strategy.k, strategy.seed)
    raise ValueError(f"unknown generation strategy {strategy.variant!r}")
