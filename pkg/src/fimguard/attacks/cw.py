"""
Carlini-Wagner l2 (fixed trade-off constant).

x_adv = (tanh(w) + 1) / 2 keeps every iterate inside [0,1]. Adam minimizes

    ||x_adv - x||_2^2 + c * max(Z_true - max_{k != true} Z_k + kappa, 0)

over w. The smallest-norm iterate that changes the label is returned; when
no iterate succeeds the attempt with the lowest hinge value is returned,
flagged "no_success".
"""

from typing import Optional

import numpy as np

from ..core.tensor import Tensor, backward
from ..models.network import Network
from ..training.optim import Adam
from ..utils.logger import setup_logger
from .base import AttackBudget, AttackOutcome, finalize, no_op, norm_of, prepare

logger = setup_logger(__name__)

DEFAULT_C = 1.0
DEFAULT_KAPPA = 0.0
DEFAULT_LR = 0.01
DEFAULT_STEPS = 200
_TANH_SHRINK = 1.0 - 1e-6


def to_tanh_space(x: np.ndarray) -> np.ndarray:
    return np.arctanh((2.0 * x - 1.0) * _TANH_SHRINK)


def from_tanh_space(w: np.ndarray) -> np.ndarray:
    return (np.tanh(w) + 1.0) / 2.0


def attack_cw_l2(net: Network, x: np.ndarray, y_true: int, budget: Optional[AttackBudget] = None,
                 c: float = DEFAULT_C, kappa: float = DEFAULT_KAPPA, lr: float = DEFAULT_LR,
                 steps: Optional[int] = None) -> AttackOutcome:
    """
    Args:
        budget: optional l2 budget; a positive ``epsilon`` caps the accepted
            norm, 0 is a no-op. ``steps`` falls back to ``budget.steps`` when
            a budget is given, else 200.
        c: weight of the hinge term (c = 0 minimizes distance only)
        kappa: confidence margin
        lr: Adam learning rate in tanh space
    """
    if c < 0:
        raise ValueError(f"c must be nonnegative, got {c}")
    x0, label_before, _, early = prepare(net, x, y_true, "l2")
    if early is not None:
        return early
    cap = budget.epsilon if budget is not None else None
    if cap == 0.0:
        return no_op(x0, label_before, "l2", "zero_budget")
    n_steps = steps if steps is not None else (budget.steps if budget is not None else DEFAULT_STEPS)
    true = int(y_true)

    w = Tensor(to_tanh_space(x0).reshape((1,) + net.input_shape), requires_grad=True)
    optimizer = Adam([w], lr=lr)
    target_image = Tensor(x0.reshape((1,) + net.input_shape))

    best_success: Optional[np.ndarray] = None
    best_norm = np.inf
    fallback = x0.copy()
    fallback_hinge = np.inf
    for step in range(n_steps):
        x_adv = (w.tanh() + 1.0) * 0.5
        diff = x_adv - target_image
        distance = (diff * diff).sum()
        logits = net.forward_logits(x_adv)
        z = logits.data[0]
        others = z.copy()
        others[true] = -np.inf
        runner_up = int(np.argmax(others))
        margin = logits[0, true] - logits[0, runner_up] + kappa
        hinge = margin.relu()
        loss = distance + c * hinge

        candidate = x_adv.data.reshape(net.input_shape).astype(np.float64)
        if int(np.argmax(z)) != true:
            found = norm_of(candidate - x0, "l2")
            if found < best_norm:
                best_norm, best_success = found, candidate
        elif hinge.item() < fallback_hinge:
            fallback_hinge, fallback = hinge.item(), candidate

        grads = backward(loss, inputs=[w], accumulate=False)
        optimizer.step([grads.get(w)])

    logger.debug("CW finished", extra={"steps": n_steps, "best_norm": float(best_norm)})
    if best_success is not None:
        return finalize(net, x0, best_success, "l2", label_before, y_true=true,
                        queries=n_steps + 1, steps_taken=n_steps, max_norm=cap)
    return finalize(net, x0, fallback, "l2", label_before, y_true=true,
                    queries=n_steps + 1, steps_taken=n_steps, flag="no_success")
