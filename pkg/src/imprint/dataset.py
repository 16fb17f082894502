"""Embedding datasets: file I/O, synthetic generation, subsampling, relabeling.

Every downstream stage consumes the :class:`EmbeddingSet` container defined
here. Labels are always contiguous integers ``0..C-1``; the loaders re-index
arbitrary label ids while preserving their sorted order. Two on-disk formats
are supported:

* binary: magic ``IMPR``, u32 version, u32 row count, u32 dim, u32 class
  count, then one u32 label per row, then the row-major f32 matrix, all
  little-endian;
* CSV: header ``label,x0,...,x{dim-1}`` followed by one row per sample.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .seeding import derive_seed, make_rng

EMBEDDING_MAGIC = b"IMPR"
EMBEDDING_FORMAT_VERSION = 1

_HEADER = struct.Struct("<4sIIII")


@dataclass(frozen=True)
class EmbeddingSet:
    """Labeled embedding matrix: one row per sample, one class id per row.

    Instances are validated and frozen at construction; the arrays are marked
    read-only so a set can be shared across parallel workers.
    """

    vectors: np.ndarray
    labels: np.ndarray
    class_count: int

    def __post_init__(self):
        vectors = np.ascontiguousarray(np.asarray(self.vectors, dtype=np.float64))
        labels = np.ascontiguousarray(np.asarray(self.labels, dtype=np.int64))
        if vectors.ndim != 2 or vectors.shape[0] == 0 or vectors.shape[1] == 0:
            raise ValueError("vectors must be a non-empty 2-D matrix")
        if labels.ndim != 1 or labels.shape[0] != vectors.shape[0]:
            raise ValueError(
                f"label count {labels.shape} does not match row count {vectors.shape[0]}"
            )
        if not np.isfinite(vectors).all():
            raise ValueError("vectors contain NaN or infinite entries")
        c = int(self.class_count)
        if c < 1:
            raise ValueError("class_count must be positive")
        if labels.min() < 0 or labels.max() >= c:
            raise ValueError(f"labels must lie in [0, {c - 1}]")
        if np.unique(labels).size != c:
            raise ValueError("every class id in [0, C-1] must appear at least once")
        vectors.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "class_count", c)

    @property
    def n_total(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def class_vectors(self, class_id: int) -> np.ndarray:
        return self.vectors[self.labels == class_id]

    def per_class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.class_count)


@dataclass(frozen=True)
class SyntheticTaskSpec:
    """Parameters of the multi-modal Gaussian-blob generator.

    Each class owns ``modes_per_class`` mode centers drawn uniformly on the
    sphere of radius ``mode_separation``; samples are isotropic normal around
    their center with ``within_mode_std``.
    """

    class_count: int
    modes_per_class: int
    samples_per_mode: int
    dim: int
    mode_separation: float
    within_mode_std: float
    seed: int

    def __post_init__(self):
        if self.class_count < 1:
            raise ValueError("class_count must be positive")
        if self.modes_per_class < 1:
            raise ValueError("modes_per_class must be >= 1")
        if self.samples_per_mode < 1:
            raise ValueError("samples_per_mode must be positive")
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if not self.mode_separation > 0:
            raise ValueError("mode_separation must be > 0")
        if not self.within_mode_std > 0:
            raise ValueError("within_mode_std must be > 0")


def _reindex_labels(raw: np.ndarray) -> tuple[np.ndarray, int]:
    """Map arbitrary integer ids to contiguous 0..C-1, preserving sort order."""
    ids = np.unique(raw)
    return np.searchsorted(ids, raw).astype(np.int64), int(ids.size)


def _resolve_format(path: Path, fmt: str | None) -> str:
    if fmt is not None:
        if fmt not in ("binary", "csv"):
            raise ValueError(f"unknown embedding format {fmt!r}")
        return fmt
    return "csv" if path.suffix.lower() == ".csv" else "binary"


def load_embeddings(path, fmt: str | None = None) -> EmbeddingSet:
    """Read an embedding file (binary or CSV) into a validated EmbeddingSet.

    The format is inferred from the ``.csv`` suffix unless ``fmt`` is given.
    """
    path = Path(path)
    if _resolve_format(path, fmt) == "csv":
        return _load_csv(path)
    return _load_binary(path)


def _load_binary(path: Path) -> EmbeddingSet:
    data = path.read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError(f"{path}: file too short for a valid header")
    magic, version, n_total, dim, declared_c = _HEADER.unpack_from(data, 0)
    if magic != EMBEDDING_MAGIC:
        raise ValueError(f"{path}: bad magic bytes, not an embedding file")
    if version != EMBEDDING_FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format version {version}")
    if n_total == 0 or dim == 0:
        raise ValueError(f"{path}: header declares an empty matrix")
    expected = _HEADER.size + 4 * n_total + 4 * n_total * dim
    if len(data) != expected:
        raise ValueError(
            f"{path}: payload size {len(data)} does not match header ({expected} expected)"
        )
    labels_off = _HEADER.size
    vec_off = labels_off + 4 * n_total
    raw_labels = np.frombuffer(data, dtype="<u4", count=n_total, offset=labels_off)
    vectors = (
        np.frombuffer(data, dtype="<f4", count=n_total * dim, offset=vec_off)
        .reshape(n_total, dim)
        .astype(np.float64)
    )
    if not np.isfinite(vectors).all():
        raise ValueError(f"{path}: non-finite embedding values")
    labels, c = _reindex_labels(raw_labels.astype(np.int64))
    if c != declared_c:
        raise ValueError(
            f"{path}: header declares {declared_c} classes but {c} are present "
            "(empty class after re-indexing)"
        )
    return EmbeddingSet(vectors, labels, c)


def _load_csv(path: Path) -> EmbeddingSet:
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if len(header) < 2 or header[0] != "label":
            raise ValueError(f"{path}: malformed header, expected 'label,x0,...'")
        dim = len(header) - 1
        if header[1:] != [f"x{i}" for i in range(dim)]:
            raise ValueError(f"{path}: malformed header, expected columns x0..x{dim - 1}")
        raw_labels: list[int] = []
        rows: list[list[float]] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != dim + 1:
                raise ValueError(
                    f"{path}:{lineno}: row has {len(row) - 1} values, expected {dim}"
                )
            try:
                raw_labels.append(int(row[0]))
                rows.append([float(v) for v in row[1:]])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: unparsable value ({exc})") from None
    if not rows:
        raise ValueError(f"{path}: no data rows")
    vectors = np.asarray(rows, dtype=np.float64)
    if not np.isfinite(vectors).all():
        raise ValueError(f"{path}: non-finite embedding values")
    labels, c = _reindex_labels(np.asarray(raw_labels, dtype=np.int64))
    return EmbeddingSet(vectors, labels, c)


def save_embeddings(dataset: EmbeddingSet, path, fmt: str | None = None) -> None:
    """Write an EmbeddingSet to disk (binary f32 payload, or CSV)."""
    path = Path(path)
    if _resolve_format(path, fmt) == "csv":
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["label"] + [f"x{i}" for i in range(dataset.dim)])
            for label, row in zip(dataset.labels, dataset.vectors):
                writer.writerow([int(label)] + [repr(float(v)) for v in row])
        return
    header = _HEADER.pack(
        EMBEDDING_MAGIC,
        EMBEDDING_FORMAT_VERSION,
        dataset.n_total,
        dataset.dim,
        dataset.class_count,
    )
    with path.open("wb") as fh:
        fh.write(header)
        fh.write(dataset.labels.astype("<u4").tobytes())
        fh.write(dataset.vectors.astype("<f4").tobytes())


def few_shot_sample(dataset: EmbeddingSet, n: int, seed: int) -> EmbeddingSet:
    """Subsample exactly ``n`` rows per class, uniformly without replacement."""
    if n < 1:
        raise ValueError("n must be positive")
    rng = make_rng(seed)
    picks = []
    for c in range(dataset.class_count):
        idx = np.flatnonzero(dataset.labels == c)
        if idx.size < n:
            raise ValueError(f"class {c} has {idx.size} samples, fewer than n={n}")
        picks.append(rng.choice(idx, size=n, replace=False))
    sel = np.concatenate(picks)
    return EmbeddingSet(dataset.vectors[sel], dataset.labels[sel], dataset.class_count)


def remap_labels(dataset: EmbeddingSet, d: int) -> EmbeddingSet:
    """Merge consecutive groups of ``d`` classes into one label.

    New label = old label // d. Classes beyond the largest multiple of d are
    dropped, so the result has C // d classes, each d-modal by construction.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    if d > dataset.class_count:
        raise ValueError(f"d={d} exceeds class count {dataset.class_count}")
    merged = dataset.class_count // d
    keep = dataset.labels < merged * d
    return EmbeddingSet(dataset.vectors[keep], dataset.labels[keep] // d, merged)


def _unit_rows(rng: np.random.Generator, shape: tuple[int, int]) -> np.ndarray:
    rows = rng.standard_normal(shape)
    norms = np.linalg.norm(rows, axis=1)
    while np.any(norms < 1e-12):
        bad = norms < 1e-12
        rows[bad] = rng.standard_normal((int(bad.sum()), shape[1]))
        norms = np.linalg.norm(rows, axis=1)
    return rows / norms[:, None]


def generate_synthetic(
    spec: SyntheticTaskSpec,
    samples_per_mode: int | None = None,
    sample_seed: int | None = None,
) -> EmbeddingSet:
    """Draw a synthetic multi-modal embedding set from ``spec``.

    Mode centers depend only on ``spec.seed``, so two calls with different
    ``sample_seed`` values share their class geometry and differ only in the
    per-sample noise. That is how matching train/test splits are built.
    """
    spm = spec.samples_per_mode if samples_per_mode is None else int(samples_per_mode)
    if spm < 1:
        raise ValueError("samples_per_mode must be positive")
    c, d, l = spec.class_count, spec.modes_per_class, spec.dim
    center_rng = make_rng(spec.seed)
    centers = _unit_rows(center_rng, (c * d, l)) * spec.mode_separation
    noise_rng = center_rng if sample_seed is None else make_rng(sample_seed)
    noise = noise_rng.standard_normal((c * d * spm, l)) * spec.within_mode_std
    vectors = np.repeat(centers, spm, axis=0) + noise
    labels = np.repeat(np.arange(c, dtype=np.int64), d * spm)
    return EmbeddingSet(vectors, labels, c)


def synthetic_train_test(
    spec: SyntheticTaskSpec,
    test_samples_per_mode: int | None = None,
    test_seed: int | None = None,
) -> tuple[EmbeddingSet, EmbeddingSet]:
    """Train/test pair from one spec: shared mode centers, independent noise."""
    train = generate_synthetic(spec)
    if test_seed is None:
        test_seed = derive_seed(spec.seed, 0x7E57)
    test = generate_synthetic(
        spec, samples_per_mode=test_samples_per_mode, sample_seed=test_seed
    )
    return train, test
