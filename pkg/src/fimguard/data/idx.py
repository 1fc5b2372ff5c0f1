"""
IDX Reader/Writer - Building Block: load_mnist_idx

Purpose:
    Bit-exact reading and writing of the IDX layout used by MNIST, plus the
    [0,1] <-> byte conversions.

Input Data:
    - images file: big-endian u32 magic 2051, u32 count, u32 rows, u32 cols, u8 pixels
    - labels file: big-endian u32 magic 2049, u32 count, u8 labels
    - either file may be gzip-compressed (".gz" suffix)

Output Data:
    - LabeledDataset with images (N, 1, H, W) scaled by 1/255 and int64 labels

Errors:
    - DataFormatError: wrong magic, short header, oversized dims, trailing bytes, label >= K
    - DataConsistencyError: image and label counts disagree
    - TruncatedFileError: payload shorter than the header declares
"""

import gzip
import math
import struct
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from ..errors import DataConsistencyError, DataFormatError, TruncatedFileError
from ..utils.logger import setup_logger
from .datasets import LabeledDataset

logger = setup_logger(__name__)

IMAGES_MAGIC = 2051
LABELS_MAGIC = 2049
MNIST_CLASSES = 10

PathLike = Union[str, Path]


def _read_bytes(path: PathLike) -> bytes:
    path = Path(path)
    if path.suffix == ".gz":
        with gzip.open(path, "rb") as f:
            return f.read()
    with open(path, "rb") as f:
        return f.read()


def _parse(raw: bytes, magic: int, ndims: int, path: PathLike) -> Tuple[Tuple[int, ...], np.ndarray]:
    header_len = 4 * (1 + ndims)
    if len(raw) < 4:
        raise DataFormatError(f"{path}: file too short for an IDX magic number")
    (found,) = struct.unpack(">I", raw[:4])
    if found != magic:
        raise DataFormatError(f"{path}: magic number mismatch (expected {magic}, found {found})")
    if len(raw) < header_len:
        raise TruncatedFileError(f"{path}: header truncated ({len(raw)} < {header_len} bytes)")
    dims = struct.unpack(f">{ndims}I", raw[4:header_len])
    if math.prod(max(d, 1) for d in dims) > np.iinfo(np.intp).max:
        raise DataFormatError(f"{path}: declared dimensions {dims} exceed the addressable size")
    expected = math.prod(dims)
    payload = len(raw) - header_len
    if payload < expected:
        raise TruncatedFileError(f"{path}: payload has {payload} bytes, header declares {expected}")
    if payload > expected:
        raise DataFormatError(f"{path}: {payload - expected} trailing bytes after declared payload")
    data = np.frombuffer(raw, dtype=np.uint8, offset=header_len, count=expected)
    return tuple(int(d) for d in dims), data


def read_idx_images(path: PathLike) -> np.ndarray:
    """Raw uint8 images of shape (N, H, W)."""
    dims, data = _parse(_read_bytes(path), IMAGES_MAGIC, 3, path)
    return data.reshape(dims)


def read_idx_labels(path: PathLike) -> np.ndarray:
    dims, data = _parse(_read_bytes(path), LABELS_MAGIC, 1, path)
    return data.reshape(dims)


def load_mnist_idx(images_path: PathLike, labels_path: PathLike,
                   num_classes: int = MNIST_CLASSES) -> LabeledDataset:
    """
    Load an IDX image/label file pair as a LabeledDataset.

    Example:
        >>> ds = load_mnist_idx("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")
        >>> ds.images.shape
        (10000, 1, 28, 28)
    """
    raw_images = read_idx_images(images_path)
    raw_labels = read_idx_labels(labels_path)
    if raw_images.shape[0] != raw_labels.shape[0]:
        raise DataConsistencyError(
            f"{raw_images.shape[0]} images in {images_path} but "
            f"{raw_labels.shape[0]} labels in {labels_path}"
        )
    if raw_labels.size and int(raw_labels.max()) >= num_classes:
        raise DataFormatError(f"{labels_path}: label {int(raw_labels.max())} >= {num_classes}")
    n, h, w = raw_images.shape
    images = (raw_images.astype(np.float64) / 255.0).reshape(n, 1, h, w)
    logger.debug("Loaded IDX pair", extra={"images": str(images_path), "count": n})
    return LabeledDataset(images, raw_labels.astype(np.int64), num_classes)


def to_bytes(images: np.ndarray) -> np.ndarray:
    """De-normalize [0,1] pixels back to uint8 (x255, round half to even)."""
    return np.clip(np.rint(np.asarray(images, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def write_idx_images(path: PathLike, images: np.ndarray) -> None:
    """
    Write images as an IDX3 file.

    ``images`` may be uint8 (N, H, W) or float [0,1] of shape (N, H, W) or
    (N, 1, H, W); floats go through to_bytes().
    """
    arr = np.asarray(images)
    if arr.ndim == 4:
        if arr.shape[1] != 1:
            raise ValueError(f"IDX images need a single channel, got shape {arr.shape}")
        arr = arr[:, 0]
    if arr.ndim != 3:
        raise ValueError(f"IDX images need shape (N, H, W), got {arr.shape}")
    if arr.dtype != np.uint8:
        arr = to_bytes(arr)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(struct.pack(">4I", IMAGES_MAGIC, *arr.shape))
        f.write(np.ascontiguousarray(arr).tobytes())


def write_idx_labels(path: PathLike, labels: np.ndarray) -> None:
    arr = np.asarray(labels)
    if arr.ndim != 1 or (arr.size and (arr.min() < 0 or arr.max() > 255)):
        raise ValueError("IDX labels must be a 1-D array of values in [0, 255]")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(struct.pack(">2I", LABELS_MAGIC, arr.size))
        f.write(arr.astype(np.uint8).tobytes())
