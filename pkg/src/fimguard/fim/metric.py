"""
Fisher Information Geometry - Building Block: ossa_direction

Purpose:
    Fisher-information quantities of a softmax classifier:
    - output-space FIM G_s = diag(1/p) and its trace
    - input Jacobian J of the probabilities (K reverse passes)
    - the input-space quadratic form eta^T G_x eta = (J eta)^T G_s (J eta)
    - the steepest KL direction through the K x K reduced matrix
      M = D^1/2 J J^T D^1/2 (D = G_s)
    - dense assemblies of G_s and G_x from the expectation definition,
      used only as verification oracles

Input Data:
    - p: probability vector (length K, on the simplex)
    - net: frozen Network; x: single input sample (net.input_shape or (1, ...))

Output Data:
    - OutputFim, InputJacobian, SpectralResult, scalars

Setup/Configuration:
    - PROB_CLAMP (1e-12): floor inside 1/p and log p
    - loss-increase test step delta = 1e-3 * sqrt(input_dim)

Notes:
    The true (model-expectation) Fisher matrix is used, which is what makes
    G_s exactly diagonal. All computations run in float64.
"""

from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from ..core.functional import PROB_CLAMP
from ..core.tensor import Tensor, backward
from ..models.network import Network, predict_proba
from ..utils.logger import setup_logger
from .eigen import eig_topk_symmetric

logger = setup_logger(__name__)

LossFn = Callable[[np.ndarray], float]


@dataclass(frozen=True)
class OutputFim:
    """Diagonal of G_s; all entries >= 1 for p on the simplex."""

    diagonal: np.ndarray

    @property
    def trace(self) -> float:
        return float(self.diagonal.sum())

    def dense(self) -> np.ndarray:
        return np.diag(self.diagonal)


@dataclass(frozen=True)
class InputJacobian:
    """K x input_dim matrix whose rows are the input gradients of p_i."""

    matrix: np.ndarray
    probs: np.ndarray
    input_shape: Tuple[int, ...]

    def column_sums(self) -> np.ndarray:
        return self.matrix.sum(axis=0)

    @property
    def is_zero(self) -> bool:
        return not np.any(self.matrix)


@dataclass(frozen=True)
class SpectralResult:
    """
    Top eigenpair of G_x obtained through the reduced matrix.

    ``eta_unit`` has the input shape and unit l2 norm, except for
    degenerate results where it is all zeros. ``reason`` names the
    degeneracy ("zero_jacobian" or "no_loss_increase").
    """

    lambda_max: float
    eta_unit: np.ndarray
    reduced_matrix: np.ndarray
    degenerate: bool = False
    reason: Optional[str] = None


def _clamped(p: np.ndarray) -> np.ndarray:
    return np.maximum(np.asarray(p, dtype=np.float64), PROB_CLAMP)


def output_fim(p: np.ndarray) -> OutputFim:
    """
    G_s for a categorical output.

    Example:
        >>> output_fim(np.array([0.5, 0.25, 0.25])).diagonal
        array([2., 4., 4.])
    """
    return OutputFim(1.0 / _clamped(p))


def fim_trace(p: np.ndarray) -> float:
    """sum_i 1/clamp(p_i); >= K^2 with equality iff p is uniform."""
    return float((1.0 / _clamped(p)).sum())


def dense_output_fim(p: np.ndarray) -> np.ndarray:
    """G_s assembled as sum_y p_y g_y g_y^T with g_y = grad_p log p_y."""
    p = np.asarray(p, dtype=np.float64)
    k = p.size
    g_s = np.zeros((k, k))
    for y in range(k):
        g = np.zeros(k)
        g[y] = 1.0 / max(p[y], PROB_CLAMP)
        g_s += p[y] * np.outer(g, g)
    return g_s


def kl_divergence(p: np.ndarray, q: np.ndarray) -> float:
    """D_KL(p || q) with 0 log 0 = 0 and q floored at PROB_CLAMP."""
    p = np.asarray(p, dtype=np.float64)
    q = _clamped(q)
    mask = p > 0
    return float(np.sum(p[mask] * (np.log(p[mask]) - np.log(q[mask]))))


def _single(net: Network, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.size != int(np.prod(net.input_shape)):
        raise ValueError(f"expected one sample of shape {net.input_shape}, got {x.shape}")
    return x.reshape((1,) + net.input_shape)


def _jacobian(net: Network, x: np.ndarray, logits: bool) -> Tuple[np.ndarray, np.ndarray]:
    xt = Tensor(_single(net, x), requires_grad=True)
    out = net.forward_logits(xt) if logits else net.forward(xt)
    k = out.shape[-1]
    rows = np.zeros((k, xt.size))
    for i in range(k):
        grads = backward(out[0, i], inputs=[xt], retain_graph=True, accumulate=False)
        if xt in grads:
            rows[i] = grads[xt].reshape(-1)
    return rows, out.data[0].copy()


def input_jacobian(net: Network, x: np.ndarray) -> InputJacobian:
    """
    d p_i / d x for a single sample, one reverse pass per class.

    BN runs in inference mode; parameters need not be frozen since
    propagation is restricted to x.
    """
    matrix, probs = _jacobian(net, x, logits=False)
    return InputJacobian(matrix, probs, net.input_shape)


def logit_jacobian(net: Network, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(d z_i / d x rows, logits z) for a single sample."""
    return _jacobian(net, x, logits=True)


def input_fim_quadratic(net: Network, x: np.ndarray, eta: np.ndarray,
                        jacobian: Optional[InputJacobian] = None) -> float:
    """eta^T G_x eta computed as (J eta)^T G_s (J eta); always >= 0."""
    jac = jacobian or input_jacobian(net, x)
    v = jac.matrix @ np.asarray(eta, dtype=np.float64).reshape(-1)
    return float(v @ (v / _clamped(jac.probs)))


def dense_input_fim(net: Network, x: np.ndarray) -> np.ndarray:
    """
    G_x = sum_y p_y grad_x log p_y grad_x log p_y^T, assembled densely.

    Goes through the log primitive rather than J, so it is an independent
    check of the reduced path. Only practical for small input_dim.
    """
    xt = Tensor(_single(net, x), requires_grad=True)
    probs = net.forward(xt)
    log_p = probs.log(clamp=PROB_CLAMP)
    n = xt.size
    g_x = np.zeros((n, n))
    for y in range(probs.shape[-1]):
        grads = backward(log_p[0, y], inputs=[xt], retain_graph=True, accumulate=False)
        g = grads[xt].reshape(-1) if xt in grads else np.zeros(n)
        g_x += float(probs.data[0, y]) * np.outer(g, g)
    return g_x


def cross_entropy_loss(label: int) -> LossFn:
    """Loss callable -log clamp(p[label]) on a probability vector."""
    def loss(p: np.ndarray) -> float:
        return float(-np.log(max(float(p[label]), PROB_CLAMP)))
    return loss


def ossa_direction(net: Network, x: np.ndarray, y_true: Optional[int] = None,
                   loss_fn: Optional[LossFn] = None) -> SpectralResult:
    """
    Unit input direction maximizing eta^T G_x eta, signed to increase the loss.

    Args:
        net: frozen network
        x: single sample
        y_true: label for the default cross-entropy loss (predicted label if None)
        loss_fn: loss on the probability vector; overrides y_true

    Returns:
        SpectralResult; degenerate (zero eta, lambda 0) for a zero Jacobian

    Raises:
        ConvergenceError: power iteration did not converge
    """
    x = _single(net, x)
    jac = input_jacobian(net, x)
    d_half = 1.0 / np.sqrt(_clamped(jac.probs))
    a = d_half[:, None] * jac.matrix
    reduced = a @ a.T
    reduced = 0.5 * (reduced + reduced.T)

    if loss_fn is None:
        label = int(np.argmax(jac.probs)) if y_true is None else int(y_true)
        loss_fn = cross_entropy_loss(label)

    zero = np.zeros(net.input_shape)
    if jac.is_zero:
        logger.warning("Degenerate spectral direction", extra={"reason": "zero_jacobian"})
        return SpectralResult(0.0, zero, reduced, degenerate=True, reason="zero_jacobian")

    lam, v = eig_topk_symmetric(reduced)
    u = a.T @ v
    norm = np.linalg.norm(u)
    if lam <= 0.0 or norm == 0.0:
        logger.warning("Degenerate spectral direction", extra={"reason": "zero_jacobian"})
        return SpectralResult(0.0, zero, reduced, degenerate=True, reason="zero_jacobian")
    eta = (u / norm).reshape(net.input_shape)

    delta = 1e-3 * np.sqrt(x.size)
    base = loss_fn(jac.probs)
    plus = loss_fn(predict_proba(net, x + delta * eta)[0])
    if plus > base:
        return SpectralResult(lam, eta, reduced)
    minus = loss_fn(predict_proba(net, x - delta * eta)[0])
    if minus > base:
        return SpectralResult(lam, -eta, reduced)
    logger.warning("Neither direction sign increases the loss",
                   extra={"loss": base, "plus": plus, "minus": minus})
    return SpectralResult(lam, eta, reduced, degenerate=True, reason="no_loss_increase")
