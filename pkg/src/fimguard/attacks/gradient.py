"""
Gradient Attacks - Building Block: FGSM / FGM / OTCM / BIM / PGD

Purpose:
    Budgeted attacks driven by the input gradient of the cross-entropy.

Input Data:
    - net: frozen Network; x: one sample in [0,1]; y_true / y_target
    - AttackBudget (norm, epsilon, steps, step_size)

Output Data:
    - AttackOutcome with achieved norm <= epsilon (post-clip)
"""

from typing import Optional

import numpy as np

from ..models.network import Network
from ..utils.logger import setup_logger
from .base import (
    PROJECTIONS,
    AttackBudget,
    AttackOutcome,
    ce_input_gradient,
    clip01,
    finalize,
    least_likely_class,
    no_op,
    prepare,
)

logger = setup_logger(__name__)


def _unit_l2(g: np.ndarray) -> Optional[np.ndarray]:
    norm = np.linalg.norm(g)
    return None if norm == 0.0 else g / norm


def _l1_direction(g: np.ndarray) -> np.ndarray:
    """Steepest l1 ascent: the single coordinate with the largest |g|."""
    direction = np.zeros_like(g)
    flat = g.reshape(-1)
    i = int(np.argmax(np.abs(flat)))
    direction.reshape(-1)[i] = np.sign(flat[i])
    return direction


def _direction(g: np.ndarray, norm: str) -> Optional[np.ndarray]:
    if norm == "linf":
        return np.sign(g)
    if norm == "l2":
        return _unit_l2(g)
    if norm == "l1":
        return _l1_direction(g)
    raise ValueError(f"norm {norm!r} not supported by gradient attacks")


def attack_fgsm(net: Network, x: np.ndarray, y_true: int, budget: AttackBudget) -> AttackOutcome:
    """x_adv = clip(x + eps * sign(grad CE(y_true)))."""
    x, label_before, _, early = prepare(net, x, y_true, "linf")
    if early is not None:
        return early
    if budget.required_epsilon() == 0.0:
        return no_op(x, label_before, "linf", "zero_budget")
    g, _ = ce_input_gradient(net, x, int(y_true))
    if not np.any(g):
        return no_op(x, label_before, "linf", "zero_gradient", queries=2)
    x_adv = clip01(x + budget.epsilon * np.sign(g))
    return finalize(net, x, x_adv, "linf", label_before, y_true=y_true, queries=2, steps_taken=1)


def attack_fgm(net: Network, x: np.ndarray, y_true: int, budget: AttackBudget) -> AttackOutcome:
    """x_adv = clip(x + eps * g / ||g||_2)."""
    x, label_before, _, early = prepare(net, x, y_true, "l2")
    if early is not None:
        return early
    if budget.required_epsilon() == 0.0:
        return no_op(x, label_before, "l2", "zero_budget")
    g, _ = ce_input_gradient(net, x, int(y_true))
    unit = _unit_l2(g)
    if unit is None:
        return no_op(x, label_before, "l2", "zero_gradient", queries=2)
    x_adv = clip01(x + budget.epsilon * unit)
    return finalize(net, x, x_adv, "l2", label_before, y_true=y_true, queries=2, steps_taken=1)


def attack_otcm(net: Network, x: np.ndarray, y_target: Optional[int], budget: AttackBudget,
                y_true: Optional[int] = None) -> AttackOutcome:
    """
    One-step target class method: descend the cross-entropy of the target.

    ``y_target=None`` picks the least-likely class under the current model.

    Raises:
        ValueError: target equals the true label, or norm is not linf/l2
    """
    if budget.norm not in ("linf", "l2"):
        raise ValueError(f"OTCM supports linf and l2, got {budget.norm}")
    norm = budget.norm
    x, label_before, p, early = prepare(net, x, y_true, norm)
    reference = label_before if y_true is None else int(y_true)
    target = least_likely_class(p, exclude=reference) if y_target is None else int(y_target)
    if target == reference:
        raise ValueError(f"target class {target} equals the true label")
    if early is not None:
        early.target = target
        return early
    if budget.required_epsilon() == 0.0:
        return no_op(x, label_before, norm, "zero_budget", target=target)
    g, _ = ce_input_gradient(net, x, target)
    direction = _direction(g, norm)
    if direction is None or not np.any(direction):
        return no_op(x, label_before, norm, "zero_gradient", target=target, queries=2)
    x_adv = clip01(x - budget.epsilon * direction)
    return finalize(net, x, x_adv, norm, label_before, target=target, queries=2, steps_taken=1)


def _iterate(net: Network, x: np.ndarray, start: np.ndarray, y_true: int,
             budget: AttackBudget) -> np.ndarray:
    project = PROJECTIONS[budget.norm]
    alpha = budget.resolved_step_size()
    x_adv = start
    for _ in range(budget.steps):
        g, _ = ce_input_gradient(net, x_adv, y_true)
        direction = _direction(g, budget.norm)
        if direction is None:
            continue
        stepped = clip01(x_adv + alpha * direction)
        x_adv = clip01(x + project(stepped - x, budget.epsilon))
    return x_adv


def attack_bim(net: Network, x: np.ndarray, y_true: int, budget: AttackBudget) -> AttackOutcome:
    """
    Basic iterative method in l1, l2 or linf.

    Each step moves along sign(g) (linf), g/||g|| (l2) or the largest-|g|
    coordinate (l1), clips to [0,1] and projects onto the epsilon ball.
    All steps are taken (no early stop).
    """
    if budget.norm not in PROJECTIONS:
        raise ValueError(f"BIM supports l1, l2 and linf, got {budget.norm}")
    x, label_before, _, early = prepare(net, x, y_true, budget.norm)
    if early is not None:
        return early
    if budget.required_epsilon() == 0.0:
        return no_op(x, label_before, budget.norm, "zero_budget")
    x_adv = _iterate(net, x, x, int(y_true), budget)
    return finalize(net, x, x_adv, budget.norm, label_before, y_true=y_true,
                    queries=1 + budget.steps, steps_taken=budget.steps)


def attack_pgd(net: Network, x: np.ndarray, y_true: int, budget: AttackBudget,
               seed: int = 0) -> AttackOutcome:
    """BIM-linf from a uniform random start in the epsilon ball (seeded)."""
    x, label_before, _, early = prepare(net, x, y_true, "linf")
    if early is not None:
        return early
    if budget.required_epsilon() == 0.0:
        return no_op(x, label_before, "linf", "zero_budget")
    linf = budget.model_copy(update={"norm": "linf"})
    rng = np.random.default_rng(seed)
    start = clip01(x + rng.uniform(-budget.epsilon, budget.epsilon, size=x.shape))
    x_adv = _iterate(net, x, start, int(y_true), linf)
    return finalize(net, x, x_adv, "linf", label_before, y_true=y_true,
                    queries=1 + budget.steps, steps_taken=budget.steps)
