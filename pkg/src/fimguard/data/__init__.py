"""Dataset ingestion, synthetic fixtures and deterministic batching."""

from .datasets import (
    BatchPlan,
    LabeledDataset,
    batches,
    load_mnist_split,
    mnist_available,
    synthetic_blobs,
    synthetic_split,
)
from .idx import (
    load_mnist_idx,
    read_idx_images,
    read_idx_labels,
    to_bytes,
    write_idx_images,
    write_idx_labels,
)

__all__ = [
    "BatchPlan",
    "LabeledDataset",
    "batches",
    "load_mnist_idx",
    "load_mnist_split",
    "mnist_available",
    "read_idx_images",
    "read_idx_labels",
    "synthetic_blobs",
    "synthetic_split",
    "to_bytes",
    "write_idx_images",
    "write_idx_labels",
]
