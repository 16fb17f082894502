"""Imprinted classifier heads: proxy assembly, prediction, serialization.

A head stores the stacked proxy matrix of all classes plus the owning class
id of every proxy row. There are no bias terms. Prediction is either ``max``
(argmax of inner products, after the inference-time normalization) or
``m_nn`` (inverse-distance weighted vote among the m nearest proxies).

Head files use the magic ``IMPH`` and the same header/payload layout family
as embedding files; proxies are stored at full f64 precision and a JSON
metadata block echoes the imprinting configuration.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from .dataset import EmbeddingSet
from .generate import GenStrategy, generate_proxies
from .normalize import l2_normalize_rows, quantile_normalize, validate_norm_modes
from .seeding import derive_seed

HEAD_MAGIC = b"IMPH"
HEAD_FORMAT_VERSION = 1

_HEAD_HEADER = struct.Struct("<4sIIII")

AGG_VARIANTS = ("max", "m_nn")


@dataclass(frozen=True)
class AggMode:
    """Output aggregation: ``max`` over activations or an m-NN vote."""

    variant: str = "max"
    m: int = 1

    def __post_init__(self):
        if self.variant not in AGG_VARIANTS:
            raise ValueError(f"unknown aggregation mode {self.variant!r}")
        if self.m < 1:
            raise ValueError("m must be >= 1")


@dataclass(frozen=True)
class ImprintConfig:
    """One point in the framework grid: generation strategy, the three
    normalization slots, and the aggregation mode.

    ``seed`` overrides the strategy's own seed when set; the grid runner uses
    that to re-seed a fixed configuration per evaluation cell.
    """

    gen: GenStrategy
    norm_pre: str = "l2"
    norm_post: str = "l2"
    norm_inf: str = "l2"
    agg: AggMode = AggMode("max")
    seed: int | None = None
    name: str | None = None

    def __post_init__(self):
        validate_norm_modes(self.norm_pre, self.norm_post, self.norm_inf)

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        gen = self.gen.variant.replace("_", "-")
        if self.gen.variant not in ("all", "mean"):
            gen = f"{gen}:{self.gen.k}"
        agg = self.agg.variant.replace("_", "-")
        if self.agg.variant == "m_nn":
            agg = f"{agg}:{self.agg.m}"
        return f"{self.norm_pre}/{gen}/{self.norm_post}/{self.norm_inf}/{agg}"


@dataclass(frozen=True)
class ClassifierHead:
    """Stacked per-class proxies plus the inference-time settings."""

    proxies: np.ndarray
    proxy_class: np.ndarray
    class_count: int
    norm_inf: str = "l2"
    agg: AggMode = AggMode("max")

    def __post_init__(self):
        proxies = np.ascontiguousarray(np.asarray(self.proxies, dtype=np.float64))
        owners = np.ascontiguousarray(np.asarray(self.proxy_class, dtype=np.int64))
        if proxies.ndim != 2 or proxies.shape[0] == 0:
            raise ValueError("proxies must be a non-empty 2-D matrix")
        if owners.shape != (proxies.shape[0],):
            raise ValueError("proxy_class must hold one class id per proxy row")
        if not np.isfinite(proxies).all():
            raise ValueError("proxies contain non-finite values")
        c = int(self.class_count)
        if c < 1 or owners.min() < 0 or owners.max() >= c:
            raise ValueError("proxy class ids must lie in [0, class_count)")
        if np.unique(owners).size != c:
            raise ValueError("every class must own at least one proxy")
        if self.norm_inf not in ("none", "l2"):
            raise ValueError(f"invalid inference normalization {self.norm_inf!r}")
        proxies.setflags(write=False)
        owners.setflags(write=False)
        object.__setattr__(self, "proxies", proxies)
        object.__setattr__(self, "proxy_class", owners)
        object.__setattr__(self, "class_count", c)

    @property
    def proxy_count(self) -> int:
        return self.proxies.shape[0]

    @property
    def dim(self) -> int:
        return self.proxies.shape[1]


def imprint(train: EmbeddingSet, config: ImprintConfig) -> ClassifierHead:
    """Build a head from training embeddings, one class at a time.

    Classes are processed in ascending id order: the pre normalization is
    applied to the class embeddings, the generation strategy produces the
    proxies, and the post normalization is applied to them. Under quantile
    post-normalization the reference distribution is the pool of all scalar
    entries of previously generated (already normalized) proxies, so class
    order matters; the first class passes through unchanged.
    """
    seed = config.seed if config.seed is not None else config.gen.seed
    blocks: list[np.ndarray] = []
    owners: list[np.ndarray] = []
    reference_pool: list[np.ndarray] = []
    for c in range(train.class_count):
        class_vectors = train.class_vectors(c)
        if config.norm_pre == "l2":
            class_vectors = l2_normalize_rows(class_vectors)
        strategy = replace(config.gen, seed=derive_seed(seed, c))
        proxies = generate_proxies(class_vectors, strategy)
        if config.norm_post == "l2":
            proxies = l2_normalize_rows(proxies)
        elif config.norm_post == "quantile":
            pooled = (
                np.concatenate(reference_pool)
                if reference_pool
                else np.empty(0, dtype=np.float64)
            )
            proxies = quantile_normalize(proxies, pooled)
        reference_pool.append(proxies.ravel())
        blocks.append(proxies)
        owners.append(np.full(proxies.shape[0], c, dtype=np.int64))
    return ClassifierHead(
        np.vstack(blocks),
        np.concatenate(owners),
        train.class_count,
        norm_inf=config.norm_inf,
        agg=config.agg,
    )


def _prepare_queries(head: ClassifierHead, queries: np.ndarray) -> np.ndarray:
    q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    if q.shape[1] != head.dim:
        raise ValueError(
            f"query dimension {q.shape[1]} does not match head dimension {head.dim}"
        )
    if head.norm_inf == "l2":
        q = l2_normalize_rows(q)
    return q


def predict_batch(
    head: ClassifierHead, queries: np.ndarray, agg: AggMode | None = None
) -> np.ndarray:
    """Predict class ids for a batch of query rows.

    Tie-breaking is pinned for determinism: proxies are stored in ascending
    class order, argmax/argmin take the first extremum, so ties resolve to
    the lower class id and then the lower proxy index.
    """
    agg = head.agg if agg is None else agg
    q = _prepare_queries(head, queries)
    if agg.variant == "max":
        scores = q @ head.proxies.T
        return head.proxy_class[np.argmax(scores, axis=1)]
    m = agg.m
    if m > head.proxy_count:
        raise ValueError(f"m={m} exceeds proxy count {head.proxy_count}")
    dists = cdist(q, head.proxies)
    order = np.argsort(dists, axis=1, kind="stable")[:, :m]
    out = np.empty(q.shape[0], dtype=np.int64)
    for i in range(q.shape[0]):
        sel = order[i]
        d = dists[i, sel]
        if d[0] == 0.0:
            # Inverse-distance weight diverges at zero: immediate win.
            out[i] = head.proxy_class[sel[0]]
            continue
        votes = np.zeros(head.class_count)
        np.add.at(votes, head.proxy_class[sel], 1.0 / d)
        out[i] = int(np.argmax(votes))
    return out


def predict_max(head: ClassifierHead, query: np.ndarray) -> int:
    """Class of the proxy with the largest inner product with the query."""
    return int(predict_batch(head, query, AggMode("max"))[0])


def predict_m_nn(head: ClassifierHead, query: np.ndarray, m: int) -> int:
    """Weighted m-nearest-neighbor vote over proxies (weights 1/distance)."""
    return int(predict_batch(head, query, AggMode("m_nn", m))[0])


def save_head(
    head: ClassifierHead,
    path,
    config: ImprintConfig | None = None,
    oracle: bool = False,
    ridge_lambda: float | None = None,
) -> None:
    """Serialize a head (magic ``IMPH``); the config echo lands in JSON meta."""
    meta = {
        "format_version": HEAD_FORMAT_VERSION,
        "norm_inf": head.norm_inf,
        "agg": head.agg.variant,
        "m": head.agg.m,
        "oracle": bool(oracle),
    }
    if config is not None:
        meta.update(
            {
                "gen": config.gen.variant,
                "k": config.gen.k,
                "seed": config.seed if config.seed is not None else config.gen.seed,
                "norm_pre": config.norm_pre,
                "norm_post": config.norm_post,
            }
        )
    if ridge_lambda is not None:
        meta["lambda"] = float(ridge_lambda)
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    header = _HEAD_HEADER.pack(
        HEAD_MAGIC, HEAD_FORMAT_VERSION, head.proxy_count, head.dim, head.class_count
    )
    with Path(path).open("wb") as fh:
        fh.write(header)
        fh.write(head.proxy_class.astype("<u4").tobytes())
        fh.write(head.proxies.astype("<f8").tobytes())
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)


def load_head(path) -> tuple[ClassifierHead, dict]:
    """Read a head file back; returns the head and its metadata echo."""
    path = Path(path)
    data = path.read_bytes()
    if len(data) < _HEAD_HEADER.size:
        raise ValueError(f"{path}: file too short for a valid header")
    magic, version, p, dim, c = _HEAD_HEADER.unpack_from(data, 0)
    if magic != HEAD_MAGIC:
        raise ValueError(f"{path}: bad magic bytes, not a head file")
    if version != HEAD_FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported head format version {version}")
    off = _HEAD_HEADER.size
    owners = np.frombuffer(data, dtype="<u4", count=p, offset=off).astype(np.int64)
    off += 4 * p
    proxies = (
        np.frombuffer(data, dtype="<f8", count=p * dim, offset=off)
        .reshape(p, dim)
        .copy()
    )
    off += 8 * p * dim
    (blob_len,) = struct.unpack_from("<I", data, off)
    off += 4
    meta = json.loads(data[off : off + blob_len].decode("utf-8"))
    agg = AggMode(meta.get("agg", "max"), int(meta.get("m", 1)))
    head = ClassifierHead(
        proxies, owners, c, norm_inf=meta.get("norm_inf", "none"), agg=agg
    )
    return head, meta
