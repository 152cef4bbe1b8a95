"""Digits ingestion, pooling, angle scaling, splitting and FF label overlay.

Pipeline for the 8x8 UCI digits: ``load_digits`` (64 pixels in 0..16) ->
``pool_features`` (2x2 mean, 16 values in 0..16) -> ``normalize_to_angles``
(radians in [0, pi]). Forward-forward models additionally see
``overlay_label`` applied, which writes a one-hot label into slots 0..9.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError, ParseError, ShapeError, ValidationError

NUM_CLASSES = 10
RAW_FEATURES = 64
POOLED_FEATURES = 16
PIXEL_MAX = 16
LABEL_SLOTS = 10


@dataclass
class Sample:
    features: np.ndarray
    label: int

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        if not 0 <= int(self.label) < NUM_CLASSES:
            raise ValidationError(f"label {self.label} outside 0..{NUM_CLASSES - 1}")
        self.label = int(self.label)


@dataclass
class Dataset:
    """Feature matrix ``x`` (N, F) with integer labels ``y`` (N,)."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.x = np.atleast_2d(np.asarray(self.x, dtype=float))
        self.y = np.asarray(self.y, dtype=np.int64).reshape(-1)
        if self.x.shape[0] != self.y.shape[0]:
            raise ShapeError(f"{self.x.shape[0]} feature rows vs {self.y.shape[0]} labels")

    def __len__(self):
        return int(self.y.shape[0])

    def __getitem__(self, i) -> Sample:
        return Sample(self.x[i], int(self.y[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @classmethod
    def from_samples(cls, samples) -> "Dataset":
        samples = list(samples)
        if not samples:
            return cls(np.zeros((0, 0)), np.zeros(0, dtype=np.int64))
        return cls(np.stack([s.features for s in samples]), np.array([s.label for s in samples]))

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.x[idx], self.y[idx])

    def concat(self, other: "Dataset") -> "Dataset":
        return Dataset(np.concatenate([self.x, other.x]), np.concatenate([self.y, other.y]))


@dataclass
class DatasetSplit:
    train: Dataset
    test: Dataset
    seed: int
    ratio: float
    train_indices: np.ndarray
    test_indices: np.ndarray


def load_digits(path) -> list[Sample]:
    """Parse a headerless CSV of 64 pixel values (0..16) followed by a label (0..9)."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"digits file not found: {path}")
    samples = []
    with open(path, encoding="utf-8", newline="") as fh:
        for row_no, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            fields = line.split(",")
            if len(fields) != RAW_FEATURES + 1:
                raise ParseError(f"expected {RAW_FEATURES + 1} fields, got {len(fields)}", row=row_no)
            try:
                values = [int(f) for f in fields]
            except ValueError as exc:
                raise ParseError(f"non-integer field ({exc})", row=row_no) from None
            pixels, label = values[:RAW_FEATURES], values[RAW_FEATURES]
            if any(not 0 <= p <= PIXEL_MAX for p in pixels):
                raise ValidationError(f"row {row_no}: pixel outside 0..{PIXEL_MAX}")
            if not 0 <= label < NUM_CLASSES:
                raise ValidationError(f"row {row_no}: label {label} outside 0..{NUM_CLASSES - 1}")
            samples.append(Sample(np.array(pixels, dtype=float), label))
    return samples


def pool_features(raw) -> np.ndarray:
    """Average non-overlapping 2x2 blocks of a row-major 8x8 image."""
    raw = np.asarray(raw, dtype=float)
    if raw.shape[-1] != RAW_FEATURES:
        raise ShapeError(f"expected {RAW_FEATURES} pixels, got {raw.shape[-1]}")
    lead = raw.shape[:-1]
    blocks = raw.reshape(*lead, 4, 2, 4, 2)
    return blocks.mean(axis=(-3, -1)).reshape(*lead, POOLED_FEATURES)


def normalize_to_angles(pooled) -> np.ndarray:
    """Map pixel intensities in [0, 16] to angles in [0, pi]."""
    pooled = np.asarray(pooled, dtype=float)
    if pooled.shape[-1] != POOLED_FEATURES:
        raise ShapeError(f"expected {POOLED_FEATURES} pooled features, got {pooled.shape[-1]}")
    if np.any(pooled < 0) or np.any(pooled > PIXEL_MAX):
        raise ValidationError(f"pooled values must lie in [0, {PIXEL_MAX}]")
    # 2x2 means of integer pixels sit on a quarter grid; nonzero angles never do,
    # so data that was already normalized is refused instead of scaled twice
    if np.any(pooled * 4 != np.round(pooled * 4)):
        raise ValidationError("pooled values must be 2x2 means of integer pixels (multiples of 1/4)")
    return pooled * (math.pi / PIXEL_MAX)


def prepare(samples) -> Dataset:
    """Raw digit samples -> dataset of 16 angle features."""
    ds = Dataset.from_samples(samples)
    if len(ds) == 0:
        raise InputError("no samples")
    return Dataset(normalize_to_angles(pool_features(ds.x)), ds.y)


def load_digit_angles(path) -> Dataset:
    return prepare(load_digits(path))


def split(samples, ratio: float = 0.75, seed: int = 0) -> DatasetSplit:
    """Seeded shuffle, then the first ``round(ratio * N)`` rows go to train."""
    ds = samples if isinstance(samples, Dataset) else Dataset.from_samples(samples)
    n = len(ds)
    if not 0 < ratio < 1:
        raise InputError(f"ratio must be in (0, 1), got {ratio}")
    if n < 2:
        raise InputError(f"need at least 2 samples to split, got {n}")
    n_train = int(round(ratio * n))
    n_train = min(max(n_train, 1), n - 1)
    perm = np.random.default_rng(seed).permutation(n)
    tr, te = np.sort(perm[:n_train]), np.sort(perm[n_train:])
    return DatasetSplit(ds.subset(tr), ds.subset(te), seed, ratio, tr, te)


def overlay_label(features, cls: int) -> np.ndarray:
    """Write one-hot(cls) * pi into slots 0..9; slots 10.. stay as they are.

    Accepts a single vector with a scalar class, or a batch with a class array.
    """
    out = np.array(features, dtype=float, copy=True)
    cls_arr = np.asarray(cls)
    if np.any(cls_arr < 0) or np.any(cls_arr >= NUM_CLASSES):
        raise ValidationError(f"class {cls} outside 0..{NUM_CLASSES - 1}")
    out[..., :LABEL_SLOTS] = 0.0
    if out.ndim == 1:
        out[int(cls_arr)] = math.pi
    else:
        out[np.arange(out.shape[0]), np.broadcast_to(cls_arr, out.shape[:1])] = math.pi
    return out


def wrong_labels(labels, rng: np.random.Generator, num_classes: int = NUM_CLASSES) -> np.ndarray:
    """Uniformly drawn labels different from ``labels`` (elementwise)."""
    labels = np.asarray(labels, dtype=np.int64)
    offset = rng.integers(1, num_classes, size=labels.shape)
    return (labels + offset) % num_classes


def make_negative(sample: Sample, rng: np.random.Generator, num_classes: int = NUM_CLASSES) -> Sample:
    """Same image, overlaid with a uniformly chosen wrong label."""
    wrong = int(wrong_labels(sample.label, rng, num_classes))
    return Sample(overlay_label(sample.features, wrong), wrong)


def make_blobs(n: int = 40, seed: int = 0, spread: float = 0.15) -> Dataset:
    """Two Gaussian blobs (labels 0 and 1) living in feature slots 10..15.

    Slots 0..9 are zero so a label overlay never clobbers the signal.
    """
    rng = np.random.default_rng(seed)
    y = np.arange(n) % 2
    centers = np.where(y[:, None] == 0, math.pi / 4, 3 * math.pi / 4)
    x = np.zeros((n, POOLED_FEATURES))
    x[:, LABEL_SLOTS:] = np.clip(centers + spread * rng.standard_normal((n, POOLED_FEATURES - LABEL_SLOTS)), 0, math.pi)
    return Dataset(x, y)


def default_data_path() -> str | None:
    return os.environ.get("QMLLAB_DATA")
