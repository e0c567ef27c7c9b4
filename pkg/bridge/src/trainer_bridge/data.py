"""Dataset handling for the training service.

A dataset is a directory containing two numpy archives:

* ``images.npy`` — float32 array of shape (N, C, H, W)
* ``labels.npy`` — int64 array of shape (N,)

The provided set is a *training set* in the protocol's sense; the
bridge further divides it into a training part and a test part with a
fixed, seed-derived 80/20 split.  Requests may ask for only a fraction
of the training part (second-level evaluations); the subsample is
drawn deterministically from the request seed.
"""

from __future__ import annotations

import hashlib
import os
import random
from dataclasses import dataclass

import numpy as np
import torch


class DataError(ValueError):
    """Raised for unloadable or inconsistent dataset directories."""


@dataclass(frozen=True)
class DatasetSpec:
    name: str
    path: str
    num_classes: int


@dataclass
class LoadedDataset:
    spec: DatasetSpec
    images: torch.Tensor
    labels: torch.Tensor
    train_indices: list[int]
    test_indices: list[int]


def _split_seed(spec: DatasetSpec, split_seed: int) -> int:
    digest = hashlib.sha256(f"{split_seed}|{spec.name}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def load_dataset(spec: DatasetSpec, split_seed: int = 0,
                 test_share: float = 0.2) -> LoadedDataset:
    """Load a dataset directory and fix its train-part/test-part split."""
    images_path = os.path.join(spec.path, "images.npy")
    labels_path = os.path.join(spec.path, "labels.npy")
    try:
        images = np.load(images_path)
        labels = np.load(labels_path)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot load dataset at {spec.path}: {exc}") from exc
    if images.ndim != 4:
        raise DataError(f"images must have shape (N, C, H, W), got {images.shape}")
    if labels.shape != (images.shape[0],):
        raise DataError("labels must be one integer per image")
    if labels.size and not 0 <= int(labels.min()) <= int(labels.max()) < spec.num_classes:
        raise DataError(f"labels outside [0, {spec.num_classes})")
    n = images.shape[0]
    if n < 2:
        raise DataError("dataset needs at least 2 samples")
    indices = list(range(n))
    random.Random(_split_seed(spec, split_seed)).shuffle(indices)
    n_test = max(1, int(round(n * test_share)))
    return LoadedDataset(spec=spec,
                         images=torch.from_numpy(images.astype(np.float32)),
                         labels=torch.from_numpy(labels.astype(np.int64)),
                         train_indices=indices[n_test:],
                         test_indices=indices[:n_test])


def subsample(indices: list[int], fraction: float, seed: int) -> list[int]:
    """Deterministic fraction of the training part for a request seed."""
    if not 0.0 < fraction <= 1.0:
        raise DataError(f"data_fraction {fraction} outside (0, 1]")
    if fraction == 1.0:
        return list(indices)
    picked = list(indices)
    random.Random(f"subsample:{seed}").shuffle(picked)
    count = max(1, int(round(len(picked) * fraction)))
    return picked[:count]


def make_separable(samples: int, num_classes: int, seed: int,
                   channels: int = 3, spatial: int = 16,
                   noise: float = 0.3) -> tuple[np.ndarray, np.ndarray]:
    """Synthetic dataset with one well-separated prototype per class."""
    rng = np.random.default_rng(seed)
    prototypes = rng.standard_normal((num_classes, channels, spatial, spatial))
    labels = rng.integers(0, num_classes, size=samples)
    images = prototypes[labels] + noise * rng.standard_normal(
        (samples, channels, spatial, spatial))
    return images.astype(np.float32), labels.astype(np.int64)


def make_random_labels(samples: int, num_classes: int, seed: int,
                       channels: int = 3, spatial: int = 16
                       ) -> tuple[np.ndarray, np.ndarray]:
    """Random images with labels independent of the pixels (no signal)."""
    rng = np.random.default_rng(seed)
    images = rng.standard_normal((samples, channels, spatial, spatial))
    labels = rng.integers(0, num_classes, size=samples)
    return images.astype(np.float32), labels.astype(np.int64)


def save_dataset(path: str, images: np.ndarray, labels: np.ndarray) -> None:
    os.makedirs(path, exist_ok=True)
    np.save(os.path.join(path, "images.npy"), images)
    np.save(os.path.join(path, "labels.npy"), labels)
