"""Dataset loading (IDX files), synthesis (Gaussian blobs), and IID partitioning."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataConsistencyError, IdxFormatError, InputError

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801

# Circumradius of the simplex on which blob class centers sit. Together with
# the caller-chosen spread this fixes class separability.
BLOB_CENTER_RADIUS = 2.5


@dataclass
class Dataset:
    """Feature matrix (N x F, float64) with integer labels in [0, classes)."""

    features: np.ndarray
    labels: np.ndarray
    classes: int

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or len(self.features) < 1:
            raise InputError(f"features must be a non-empty 2-D matrix, got {self.features.shape}")
        if self.labels.shape != (len(self.features),):
            raise InputError("label count does not match feature rows")
        if not np.all(np.isfinite(self.features)):
            raise InputError("features contain non-finite values")
        if self.labels.min() < 0 or self.labels.max() >= self.classes:
            raise InputError(f"labels must lie in [0, {self.classes})")

    def __len__(self) -> int:
        return len(self.features)

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices)
        return Dataset(self.features[idx], self.labels[idx], self.classes)


def _read_idx(path, expected_magic: int, ndim: int):
    blob = Path(path).read_bytes()
    header = 4 * (1 + ndim)
    if len(blob) < header:
        raise IdxFormatError(f"{path}: truncated header ({len(blob)} bytes)")
    magic = struct.unpack(">I", blob[:4])[0]
    if magic != expected_magic:
        raise IdxFormatError(
            f"{path}: bad magic 0x{magic:08X}, expected 0x{expected_magic:08X}"
        )
    dims = struct.unpack(f">{ndim}I", blob[4:header])
    payload = blob[header:]
    expected = int(np.prod(dims)) if dims else 0
    if len(payload) != expected:
        kind = "truncated" if len(payload) < expected else "oversized"
        raise IdxFormatError(f"{path}: {kind} payload ({len(payload)} bytes, expected {expected})")
    return dims, np.frombuffer(payload, dtype=np.uint8)


def load_idx(images_path, labels_path) -> Dataset:
    """Parse an IDX image/label file pair; pixels are scaled by 1/255."""
    (count, rows, cols), pixels = _read_idx(images_path, IMAGES_MAGIC, ndim=3)
    (label_count,), raw_labels = _read_idx(labels_path, LABELS_MAGIC, ndim=1)
    if label_count != count:
        raise DataConsistencyError(
            f"{images_path} holds {count} images but {labels_path} holds {label_count} labels"
        )
    features = pixels.astype(np.float64).reshape(count, rows * cols) / 255.0
    labels = raw_labels.astype(np.int64)
    return Dataset(features, labels, classes=int(labels.max()) + 1)


def save_idx(dataset: Dataset, images_path, labels_path, rows: int | None = None, cols: int | None = None) -> None:
    """Write a dataset as an IDX pair; features must lie in [0, 1].

    Pixels are quantized to bytes, so a round trip reproduces features to
    1/255 resolution and labels exactly.
    """
    n, f = dataset.features.shape
    if rows is None or cols is None:
        rows, cols = 1, f
    if rows * cols != f:
        raise InputError(f"rows*cols = {rows * cols} does not match feature length {f}")
    pixels = np.rint(np.clip(dataset.features, 0.0, 1.0) * 255.0).astype(np.uint8)
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", IMAGES_MAGIC, n, rows, cols))
        fh.write(pixels.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", LABELS_MAGIC, n))
        fh.write(dataset.labels.astype(np.uint8).tobytes())


def _simplex_centers(classes: int, feature_dim: int, rng: np.random.Generator) -> np.ndarray:
    """Seeded class centers: orthonormalized random directions scaled to a
    fixed radius, giving equal pairwise distances while classes <= dim."""
    raw = rng.standard_normal((classes, feature_dim))
    centers = np.empty_like(raw)
    for c in range(classes):
        v = raw[c].copy()
        for prev in range(min(c, feature_dim)):
            v -= (v @ centers[prev]) * centers[prev]
        norm = np.linalg.norm(v)
        if norm < 1e-9:
            # Degenerate draw (or more classes than dimensions): keep the raw
            # direction instead of an orthogonalized one.
            v = raw[c]
            norm = np.linalg.norm(v)
        centers[c] = v / norm
    return centers * BLOB_CENTER_RADIUS


def synth_blobs(classes: int, per_class: int, feature_dim: int, spread: float, seed: int) -> Dataset:
    """One Gaussian cluster per class around seeded simplex centers."""
    if classes < 1 or per_class < 1 or feature_dim < 1:
        raise InputError("classes, per_class, and feature_dim must be positive")
    if spread < 0:
        raise InputError("spread must be non-negative")
    rng = np.random.Generator(np.random.PCG64(seed))
    centers = _simplex_centers(classes, feature_dim, rng)
    features = np.empty((classes * per_class, feature_dim))
    labels = np.empty(classes * per_class, dtype=np.int64)
    for c in range(classes):
        block = slice(c * per_class, (c + 1) * per_class)
        features[block] = centers[c] + spread * rng.standard_normal((per_class, feature_dim))
        labels[block] = c
    return Dataset(features, labels, classes)


def blob_train_test(
    classes: int,
    train_per_class: int,
    test_per_class: int,
    feature_dim: int,
    spread: float,
    seed: int,
) -> tuple[Dataset, Dataset]:
    """Generate one blob dataset and split each class block into train/test."""
    total = train_per_class + test_per_class
    full = synth_blobs(classes, total, feature_dim, spread, seed)
    train_idx, test_idx = [], []
    for c in range(classes):
        start = c * total
        train_idx.extend(range(start, start + train_per_class))
        test_idx.extend(range(start + train_per_class, start + total))
    return full.subset(train_idx), full.subset(test_idx)


def partition_iid(dataset: Dataset, num_shards: int, seed: int) -> list[np.ndarray]:
    """Seeded global shuffle followed by a round-robin split into shards."""
    n = len(dataset)
    if num_shards < 1:
        raise InputError("shard count must be positive")
    if num_shards > n:
        raise InputError(f"cannot split {n} examples into {num_shards} shards")
    rng = np.random.Generator(np.random.PCG64(seed))
    order = rng.permutation(n)
    return [order[k::num_shards] for k in range(num_shards)]
