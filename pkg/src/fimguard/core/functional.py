"""
Functional layer over the tensor primitives.

Thin named wrappers used by models, losses and attacks, plus the clamped
("safe") log/reciprocal variants that every loss goes through.
"""

from typing import Optional

import numpy as np

from .tensor import ArrayLike, Tensor, apply_primitive, as_tensor

# Floor applied to probabilities inside 1/p and log p.
PROB_CLAMP = 1e-12


def conv2d(x: Tensor, weight: Tensor, bias: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    return apply_primitive("conv2d", (x, weight, bias), stride=stride, padding=padding)


def batch_norm(x: Tensor, gamma: Tensor, beta: Tensor, running_mean: np.ndarray,
               running_var: np.ndarray, training: bool = False,
               momentum: float = 0.1, eps: float = 1e-5) -> Tensor:
    """Batch norm; running statistics are numpy buffers updated in place when training."""
    return apply_primitive(
        "batch_norm", (x, gamma, beta),
        running_mean=running_mean, running_var=running_var,
        training=training, momentum=momentum, eps=eps,
    )


def maxpool2d(x: Tensor, size: int = 2) -> Tensor:
    return apply_primitive("maxpool2d", (x,), size=size)


def relu(x: Tensor) -> Tensor:
    return apply_primitive("relu", (x,))


def softmax(x: Tensor) -> Tensor:
    return apply_primitive("softmax", (x,))


def flatten(x: Tensor) -> Tensor:
    return x.reshape(x.shape[0], -1)


def log_safe(p: ArrayLike, clamp: float = PROB_CLAMP) -> Tensor:
    return apply_primitive("log", (p,), clamp=clamp)


def reciprocal_safe(p: ArrayLike, clamp: float = PROB_CLAMP) -> Tensor:
    return apply_primitive("reciprocal", (p,), clamp=clamp)


def one_hot(labels: np.ndarray, num_classes: int, dtype: Optional[type] = None) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    out = np.zeros((labels.size, num_classes), dtype=dtype or np.float64)
    out[np.arange(labels.size), labels] = 1.0
    return out


def cross_entropy(probs: Tensor, targets: ArrayLike) -> Tensor:
    """
    Per-sample cross-entropy ``-sum_k y_k log p_k`` on probability rows.

    ``targets`` is a (B, K) array of one-hot or soft label rows.
    Returns a (B,) Tensor.
    """
    targets = as_tensor(targets)
    return -(targets * log_safe(probs)).sum(axis=-1)


def cross_entropy_labels(probs: Tensor, labels: np.ndarray) -> Tensor:
    """Per-sample cross-entropy for integer class labels."""
    k = probs.shape[-1]
    return cross_entropy(probs, one_hot(labels, k, dtype=probs.dtype.type))
