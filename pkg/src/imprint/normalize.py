"""Normalization modes for embeddings and generated weights.

Three modes exist: ``none``, ``l2``, and ``quantile``. They can be applied at
three points of the pipeline: to embeddings before generation (pre), to the
generated weights (post), and to query embeddings at inference (inf). The
quantile mode is only valid at the post slot because it needs previously
generated weights as its reference distribution.
"""

from __future__ import annotations

import numpy as np

NORM_MODES = ("none", "l2", "quantile")
EMBEDDING_NORM_MODES = ("none", "l2")


def validate_norm_modes(norm_pre: str, norm_post: str, norm_inf: str) -> None:
    """Reject unknown modes and quantile placement outside the post slot."""
    for slot, mode in (("pre", norm_pre), ("post", norm_post), ("inf", norm_inf)):
        if mode not in NORM_MODES:
            raise ValueError(f"unknown norm mode {mode!r} at norm_{slot}")
    if norm_pre == "quantile" or norm_inf == "quantile":
        raise ValueError("quantile normalization can only be applied at the post slot")


def l2_normalize(v: np.ndarray) -> np.ndarray:
    """Scale a vector to unit Euclidean length. Zero vectors are an error."""
    v = np.asarray(v, dtype=np.float64)
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise ValueError("cannot L2-normalize a zero vector")
    return v / norm


def l2_normalize_rows(matrix: np.ndarray) -> np.ndarray:
    """Row-wise L2 normalization; any zero row is an error."""
    matrix = np.asarray(matrix, dtype=np.float64)
    norms = np.linalg.norm(matrix, axis=1)
    if np.any(norms == 0.0):
        bad = int(np.flatnonzero(norms == 0.0)[0])
        raise ValueError(f"cannot L2-normalize zero row {bad}")
    return matrix / norms[:, None]


def quantile_normalize(new_weights: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Map each weight vector rank-wise onto the reference distribution.

    The i-th smallest entry of a vector of length l is replaced by the value
    at quantile (i - 0.5) / l of the sorted reference, with linear
    interpolation between the reference order statistics at mid-point plotting
    positions (clamped at the extremes). Ties keep their original index order.
    An empty reference (first imprinted class) returns the weights unchanged.
    """
    weights = np.atleast_2d(np.asarray(new_weights, dtype=np.float64))
    reference = np.asarray(reference, dtype=np.float64).ravel()
    if reference.size == 0:
        return weights.copy()
    ref_sorted = np.sort(reference)
    ref_positions = (np.arange(reference.size) + 0.5) / reference.size
    dim = weights.shape[1]
    targets = (np.arange(dim) + 0.5) / dim
    mapped = np.interp(targets, ref_positions, ref_sorted)
    out = np.empty_like(weights)
    for i, row in enumerate(weights):
        order = np.argsort(row, kind="stable")
        out[i, order] = mapped
    return out
