"""
Finite-difference oracle used to verify every reverse-mode gradient.
"""

from typing import Callable, Union

import numpy as np

from .tensor import Tensor, no_grad

ScalarFn = Callable[[Tensor], Union[Tensor, float]]


def _scalar(value: Union[Tensor, float]) -> float:
    if isinstance(value, Tensor):
        return value.item()
    return float(np.asarray(value).reshape(-1)[0])


def finite_difference_gradient(f: ScalarFn, x: Tensor, step: float = 1e-5) -> Tensor:
    """
    Central-difference gradient of a scalar function.

    Each coordinate i is estimated as (f(x + h e_i) - f(x - h e_i)) / 2h.
    Evaluation happens in float64 without taping.

    Raises:
        ValueError: step is not positive
    """
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    base = np.asarray(x.data, dtype=np.float64)
    flat = base.reshape(-1)
    grad = np.zeros_like(flat)
    with no_grad():
        for i in range(flat.size):
            plus = flat.copy()
            plus[i] += step
            minus = flat.copy()
            minus[i] -= step
            f_plus = _scalar(f(Tensor(plus.reshape(base.shape))))
            f_minus = _scalar(f(Tensor(minus.reshape(base.shape))))
            grad[i] = (f_plus - f_minus) / (2.0 * step)
    return Tensor(grad.reshape(base.shape))


def relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-8) -> float:
    """max |a - b| / max(|a|, |b|, floor), the metric used by the gradient checks."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    scale = max(float(np.max(np.abs(a), initial=0.0)), float(np.max(np.abs(b), initial=0.0)), floor)
    return float(np.max(np.abs(a - b), initial=0.0)) / scale
