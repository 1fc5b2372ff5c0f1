"""Fisher-information mathematics for softmax classifiers."""

from .eigen import eig_topk_symmetric, jacobi_eigh
from .metric import (
    InputJacobian,
    OutputFim,
    SpectralResult,
    cross_entropy_loss,
    dense_input_fim,
    dense_output_fim,
    fim_trace,
    input_fim_quadratic,
    input_jacobian,
    kl_divergence,
    logit_jacobian,
    ossa_direction,
    output_fim,
)

__all__ = [
    "InputJacobian",
    "OutputFim",
    "SpectralResult",
    "cross_entropy_loss",
    "dense_input_fim",
    "dense_output_fim",
    "eig_topk_symmetric",
    "fim_trace",
    "input_fim_quadratic",
    "input_jacobian",
    "jacobi_eigh",
    "kl_divergence",
    "logit_jacobian",
    "ossa_direction",
    "output_fim",
]
