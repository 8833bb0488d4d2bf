"""Bundled desk-scale datasets.

Two sources, both selectable from the experiment config:

* a seeded Gaussian-blobs classification generator (``make_blobs``);
* a flat binary image format with loader and writer, so small standard
  image sets can be converted once and streamed from disk.

Flat binary layout (little-endian), one file per split::

    magic    4 bytes   b"EPDB"
    version  u8        1
    n        u32       number of samples
    d        u32       features per sample (e.g. height*width*channels)
    c        u32       number of classes (<= 256)
    records  n times:  label u8, then d feature bytes (uint8)

Features load as float64 in [0, 1] (divided by 255).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FLAT_MAGIC = b"EPDB"
FLAT_VERSION = 1
_HEADER = struct.Struct("<4sBIII")


@dataclass
class Dataset:
    x_train: np.ndarray  # (T, D) float64
    y_train: np.ndarray  # (T,) int64 labels in [0, n_classes)
    x_test: np.ndarray   # (V, D)
    y_test: np.ndarray   # (V,)
    n_classes: int


def make_blobs(
    n_train: int,
    n_test: int,
    n_classes: int,
    n_features: int,
    cluster_std: float = 2.0,
    center_span: float = 4.0,
    seed: int = 7,
) -> Dataset:
    """Isotropic Gaussian clusters, one per class, centers ~ U(-span, span)."""
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-center_span, center_span, size=(n_classes, n_features))
    n = n_train + n_test
    labels = rng.integers(0, n_classes, size=n)
    x = centers[labels] + rng.normal(0.0, cluster_std, size=(n, n_features))
    return Dataset(
        x_train=x[:n_train],
        y_train=labels[:n_train].astype(np.int64),
        x_test=x[n_train:],
        y_test=labels[n_train:].astype(np.int64),
        n_classes=n_classes,
    )


def write_flat_binary(path: str | Path, features: np.ndarray, labels: np.ndarray, n_classes: int) -> None:
    """Write one split in the flat binary format; features must be uint8."""
    features = np.ascontiguousarray(features, dtype=np.uint8)
    labels = np.asarray(labels)
    if features.ndim != 2:
        raise ValueError(f"features must be 2-D, got shape {features.shape}")
    if len(features) != len(labels):
        raise ValueError(f"{len(features)} feature rows vs {len(labels)} labels")
    if not (0 < n_classes <= 256):
        raise ValueError(f"n_classes must be in 1..256, got {n_classes}")
    if labels.min(initial=0) < 0 or (len(labels) and labels.max() >= n_classes):
        raise ValueError("labels out of range for n_classes")
    n, d = features.shape
    records = np.empty((n, d + 1), dtype=np.uint8)
    records[:, 0] = labels
    records[:, 1:] = features
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(FLAT_MAGIC, FLAT_VERSION, n, d, n_classes))
        fh.write(records.tobytes())


def read_flat_binary(path: str | Path):
    """Read one split; returns (features float64 in [0,1], labels int64, n_classes)."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, version, n, d, c = _HEADER.unpack_from(raw)
    if magic != FLAT_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != FLAT_VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    expected = _HEADER.size + n * (d + 1)
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(raw)}")
    records = np.frombuffer(raw, dtype=np.uint8, offset=_HEADER.size).reshape(n, d + 1)
    labels = records[:, 0].astype(np.int64)
    if len(labels) and labels.max() >= c:
        raise ValueError(f"{path}: label {labels.max()} out of range for {c} classes")
    features = records[:, 1:].astype(np.float64) / 255.0
    return features, labels, c


def load_flat_binary_dataset(directory: str | Path) -> Dataset:
    """Load ``train.bin`` and ``test.bin`` from a directory."""
    directory = Path(directory)
    x_train, y_train, c_train = read_flat_binary(directory / "train.bin")
    x_test, y_test, c_test = read_flat_binary(directory / "test.bin")
    if c_train != c_test:
        raise ValueError(f"class count mismatch: train {c_train} vs test {c_test}")
    if x_train.shape[1] != x_test.shape[1]:
        raise ValueError(
            f"feature dim mismatch: train {x_train.shape[1]} vs test {x_test.shape[1]}"
        )
    return Dataset(x_train, y_train, x_test, y_test, n_classes=c_train)


def one_hot(labels: np.ndarray, n_classes: int) -> np.ndarray:
    out = np.zeros((len(labels), n_classes))
    out[np.arange(len(labels)), labels] = 1.0
    return out
