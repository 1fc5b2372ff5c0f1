"""
Jacobian Saliency Map Attack - Building Block: attack_jsma

Purpose:
    Targeted l0 attack: repeatedly pick the pixel pair whose joint change
    most increases the target logit while decreasing the others, and push
    both pixels by theta (toward 1 for theta > 0, toward 0 for theta < 0).

Saliency (pair p, q, search direction s = sign(theta)):
    A = s * (a_p + a_q)   a = d z_target / dx
    B = s * (b_p + b_q)   b = sum_{k != target} d z_k / dx
    admissible when A > 0 and B < 0; score = A * |B|
"""

import math
from typing import Optional

import numpy as np

from ..fim.metric import logit_jacobian
from ..models.network import Network
from ..utils.logger import setup_logger
from .base import AttackBudget, AttackOutcome, finalize, no_op, prepare, runner_up_class

logger = setup_logger(__name__)

DEFAULT_THETA = 1.0
DEFAULT_PIXEL_FRACTION = 0.1


def saliency_pair(jacobian: np.ndarray, target: int, domain: np.ndarray,
                  direction: float = 1.0) -> Optional[tuple]:
    """
    Best admissible (p, q) among ``domain`` indices, or None.

    Ties resolve to the lowest (p, q) in row-major order.
    """
    if domain.size < 2:
        return None
    alpha = jacobian[target, domain]
    beta = jacobian.sum(axis=0)[domain] - alpha
    a = direction * (alpha[:, None] + alpha[None, :])
    b = direction * (beta[:, None] + beta[None, :])
    admissible = (a > 0) & (b < 0)
    np.fill_diagonal(admissible, False)
    if not admissible.any():
        return None
    score = np.where(admissible, a * np.abs(b), -np.inf)
    i, j = np.unravel_index(int(np.argmax(score)), score.shape)
    return int(domain[i]), int(domain[j])


def attack_jsma(net: Network, x: np.ndarray, y_target: Optional[int] = None,
                budget: Optional[AttackBudget] = None, theta: float = DEFAULT_THETA,
                y_true: Optional[int] = None) -> AttackOutcome:
    """
    Args:
        y_target: target class (default: runner-up class under the model)
        budget: l0 budget; ``epsilon`` is the maximum number of modified
            pixels, a whole number (default ceil(0.1 * input_dim)); 0 makes
            the call a no-op
        theta: per-pixel change; sign selects the increasing/decreasing variant

    Returns:
        AttackOutcome with the l0 norm; flag "budget_exhausted" or
        "no_salient_pair" on failure
    """
    if theta == 0:
        raise ValueError("theta must be nonzero")
    x0, label_before, p, early = prepare(net, x, y_true, "l0")
    target = runner_up_class(p) if y_target is None else int(y_target)
    if target == label_before and early is None:
        raise ValueError(f"target class {target} equals the current prediction")
    if early is not None:
        early.target = target
        return early
    budget = budget or AttackBudget(norm="l0")
    if budget.epsilon == 0.0:
        return no_op(x0, label_before, "l0", "zero_budget", target=target)
    if budget.epsilon is None:
        max_pixels = math.ceil(DEFAULT_PIXEL_FRACTION * x0.size)
    elif float(budget.epsilon).is_integer():
        max_pixels = int(budget.epsilon)
    else:
        raise ValueError(f"JSMA epsilon is a pixel count, got {budget.epsilon}")

    flat = x0.reshape(-1).copy()
    direction = 1.0 if theta > 0 else -1.0
    active = flat < 1.0 if theta > 0 else flat > 0.0
    modified = set()
    queries, steps, flag = 1, 0, None
    while True:
        jac, z = logit_jacobian(net, flat.reshape(x0.shape))
        queries += 1
        if int(np.argmax(z)) == target:
            break
        pair = saliency_pair(jac, target, np.nonzero(active)[0], direction)
        if pair is None:
            flag = "no_salient_pair"
            break
        if len(modified | set(pair)) > max_pixels:
            flag = "budget_exhausted"
            break
        for i in pair:
            flat[i] = np.clip(flat[i] + theta, 0.0, 1.0)
            modified.add(i)
            if (theta > 0 and flat[i] >= 1.0) or (theta < 0 and flat[i] <= 0.0):
                active[i] = False
        steps += 1

    logger.debug("JSMA finished", extra={"steps": steps, "pixels": len(modified), "flag": flag})
    return finalize(net, x0, flat.reshape(x0.shape), "l0", label_before, target=target,
                    queries=queries, steps_taken=steps, flag=flag)
