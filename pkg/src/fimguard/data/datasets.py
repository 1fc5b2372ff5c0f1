"""
Datasets and Batching - Building Block: LabeledDataset

Purpose:
    Immutable (images, labels) container, the synthetic Gaussian-blob fixture,
    deterministic batching and the standard MNIST split loader.

Input Data:
    - images (N, 1, H, W) in [0,1]; labels (N,) in [0, K)
    - BatchPlan(batch_size, seed, epoch)

Output Data:
    - LabeledDataset views (subset / take)
    - list of (images, labels) batches, each sample exactly once per epoch

Setup/Configuration:
    - data directory: Settings.data_dir (FIMGUARD_DATA_DIR)
    - split sizes: run config data.train_limit / data.test_limit
"""

from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import DataConsistencyError, DataError

MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


@dataclass(frozen=True)
class LabeledDataset:
    """
    Images with integer class labels.

    Example:
        >>> ds = synthetic_blobs(num_classes=3, per_class=5, dim=4, seed=0)
        >>> len(ds), ds.input_shape
        (15, (1, 1, 4))
    """

    images: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self) -> None:
        if self.images.ndim != 4:
            raise DataConsistencyError(f"images must be (N, C, H, W), got {self.images.shape}")
        if self.images.shape[0] != self.labels.shape[0]:
            raise DataConsistencyError(
                f"{self.images.shape[0]} images vs {self.labels.shape[0]} labels"
            )
        if self.images.size and (self.images.min() < 0.0 or self.images.max() > 1.0):
            raise DataConsistencyError("pixel values must lie in [0, 1]")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise DataConsistencyError(f"labels must lie in [0, {self.num_classes})")
        self.images.setflags(write=False)
        self.labels.setflags(write=False)

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @property
    def input_shape(self) -> Tuple[int, ...]:
        return tuple(self.images.shape[1:])

    @property
    def input_dim(self) -> int:
        return int(np.prod(self.input_shape))

    def subset(self, indices: Sequence[int]) -> "LabeledDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(self.images[idx].copy(), self.labels[idx].copy(), self.num_classes)

    def take(self, n: int) -> "LabeledDataset":
        """First ``n`` samples (all of them if ``n`` exceeds the size)."""
        return self.subset(np.arange(min(n, len(self))))


@dataclass(frozen=True)
class BatchPlan:
    """Batch size plus the (seed, epoch) pair that fixes the shuffle order."""

    batch_size: int
    seed: int = 0
    epoch: int = 0
    shuffle: bool = True

    def order(self, n: int) -> np.ndarray:
        if not self.shuffle:
            return np.arange(n)
        rng = np.random.default_rng([self.seed, self.epoch])
        return rng.permutation(n)


def batches(dataset: LabeledDataset, plan: BatchPlan) -> List[Tuple[np.ndarray, np.ndarray]]:
    """
    Split ``dataset`` into batches following ``plan``.

    Every sample appears exactly once; the final partial batch is kept.

    Raises:
        ValueError: batch size not in [1, N]
    """
    n = len(dataset)
    if plan.batch_size < 1 or plan.batch_size > n:
        raise ValueError(f"batch size {plan.batch_size} must be in [1, {n}]")
    order = plan.order(n)
    return [
        (dataset.images[order[i:i + plan.batch_size]], dataset.labels[order[i:i + plan.batch_size]])
        for i in range(0, n, plan.batch_size)
    ]


def synthetic_blobs(num_classes: int, per_class: int, dim: int, seed: int,
                    noise: float = 0.05, min_separation: float = 0.3) -> LabeledDataset:
    """
    Gaussian clusters in [0,1]^dim, shaped (K*N, 1, 1, dim).

    Means are drawn uniformly from [0.15, 0.85]^dim and redrawn until all
    pairwise distances reach ``min_separation``; when that fails repeatedly
    (small dim, many classes) the means are spread along the diagonal.

    Raises:
        ValueError: num_classes < 2 or per_class < 1
    """
    if num_classes < 2 or per_class < 1 or dim < 1:
        raise ValueError(
            f"need num_classes >= 2, per_class >= 1, dim >= 1 "
            f"(got {num_classes}, {per_class}, {dim})"
        )
    rng = np.random.default_rng(seed)
    means = None
    for _ in range(1000):
        candidate = rng.uniform(0.15, 0.85, size=(num_classes, dim))
        diffs = candidate[:, None, :] - candidate[None, :, :]
        dist = np.sqrt((diffs ** 2).sum(axis=-1))
        if dist[np.triu_indices(num_classes, k=1)].min() >= min_separation:
            means = candidate
            break
    if means is None:
        steps = 0.15 + 0.7 * np.arange(num_classes) / (num_classes - 1)
        means = np.repeat(steps[:, None], dim, axis=1)

    labels = np.repeat(np.arange(num_classes), per_class)
    points = means[labels] + noise * rng.standard_normal((labels.size, dim))
    images = np.clip(points, 0.0, 1.0).reshape(labels.size, 1, 1, dim)
    return LabeledDataset(images, labels.astype(np.int64), num_classes)


def synthetic_split(num_classes: int, per_class: int, test_per_class: int, dim: int,
                    seed: int, noise: float = 0.05) -> Tuple[LabeledDataset, LabeledDataset]:
    """
    Train/test pair drawn from one set of blob means.

    The first ``per_class`` points of each class go to the training split,
    the remaining ``test_per_class`` to the test split.
    """
    full = synthetic_blobs(num_classes, per_class + test_per_class, dim, seed, noise=noise)
    block = per_class + test_per_class
    starts = np.arange(num_classes) * block
    train_idx = (starts[:, None] + np.arange(per_class)[None, :]).reshape(-1)
    test_idx = (starts[:, None] + per_class + np.arange(test_per_class)[None, :]).reshape(-1)
    return full.subset(train_idx), full.subset(test_idx)


def load_mnist_split(data_dir: Union[str, Path], train_limit: Optional[int] = 10000,
                     test_limit: Optional[int] = 2000) -> Tuple[LabeledDataset, LabeledDataset]:
    """
    Load the standard MNIST train/test files from ``data_dir``.

    Plain or ``.gz`` files are accepted. Limits keep the first samples of
    each split (None keeps everything).

    Raises:
        DataError: a required file is missing
    """
    from .idx import load_mnist_idx

    data_dir = Path(data_dir)
    splits = []
    for name, limit in (("train", train_limit), ("test", test_limit)):
        paths = []
        for filename in MNIST_FILES[name]:
            candidates = [data_dir / filename, data_dir / f"{filename}.gz"]
            found = next((p for p in candidates if p.exists()), None)
            if found is None:
                raise DataError(f"MNIST file {filename} not found in {data_dir}")
            paths.append(found)
        dataset = load_mnist_idx(paths[0], paths[1])
        splits.append(dataset.take(limit) if limit is not None else dataset)
    return splits[0], splits[1]


def mnist_available(data_dir: Union[str, Path]) -> bool:
    data_dir = Path(data_dir)
    return all(
        (data_dir / f).exists() or (data_dir / f"{f}.gz").exists()
        for pair in MNIST_FILES.values()
        for f in pair
    )
