"""Reverse-mode tensor engine."""

from .functional import PROB_CLAMP, cross_entropy, cross_entropy_labels, log_safe, one_hot, reciprocal_safe
from .gradcheck import finite_difference_gradient, relative_error
from .tensor import (
    Tensor,
    TapeNode,
    apply_primitive,
    as_tensor,
    backward,
    get_default_dtype,
    is_grad_enabled,
    no_grad,
    set_default_dtype,
)

__all__ = [
    "PROB_CLAMP",
    "Tensor",
    "TapeNode",
    "apply_primitive",
    "as_tensor",
    "backward",
    "cross_entropy",
    "cross_entropy_labels",
    "finite_difference_gradient",
    "get_default_dtype",
    "is_grad_enabled",
    "log_safe",
    "no_grad",
    "one_hot",
    "reciprocal_safe",
    "relative_error",
    "set_default_dtype",
]
