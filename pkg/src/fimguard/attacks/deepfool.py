"""
DeepFool - Building Block: attack_deepfool

Purpose:
    Minimal l2 perturbation by iterative linearization of the multiclass
    decision boundaries on the logits.

Algorithm:
    At iterate x_i with original class k0, for every k != k0 let
    w_k = grad z_k - grad z_k0 and f_k = z_k - z_k0. Step to the nearest
    linearized boundary l = argmin |f_k| / ||w_k||, accumulate the steps in
    r_tot and set x_{i+1} = clip(x0 + (1 + overshoot) * r_tot). Stop as soon
    as the label changes.
"""

from typing import Optional

import numpy as np

from ..fim.metric import logit_jacobian
from ..models.network import Network
from ..utils.logger import setup_logger
from .base import AttackBudget, AttackOutcome, clip01, finalize, no_op, prepare

logger = setup_logger(__name__)

DEFAULT_OVERSHOOT = 0.02
DEFAULT_MAX_STEPS = 50
# keeps a step strictly past a boundary the iterate already sits on
_STEP_PAD = 1e-6


def attack_deepfool(net: Network, x: np.ndarray, budget: Optional[AttackBudget] = None,
                    y_true: Optional[int] = None,
                    overshoot: float = DEFAULT_OVERSHOOT) -> AttackOutcome:
    """
    Args:
        budget: l2 budget; ``steps`` is the iteration cap (default 50 when no
            budget is given), a positive ``epsilon`` caps the accepted norm and
            ``epsilon == 0`` makes the call a no-op (None: uncapped)
        y_true: true label; an already-misclassified sample returns at once
        overshoot: final scale is (1 + overshoot)

    Returns:
        AttackOutcome; flag "max_steps" when the label never changed
    """
    budget = budget or AttackBudget(norm="l2", steps=DEFAULT_MAX_STEPS)
    cap = budget.epsilon
    x0, k0, _, early = prepare(net, x, y_true, "l2")
    if early is not None:
        return early
    if cap == 0.0:
        return no_op(x0, k0, "l2", "zero_budget")

    r_tot = np.zeros(x0.size)
    x_i = x0.copy()
    queries = 1
    for step in range(budget.steps):
        jac, z = logit_jacobian(net, x_i)
        queries += 1
        if int(np.argmax(z)) != k0:
            return finalize(net, x0, x_i, "l2", k0, y_true=y_true, queries=queries,
                            steps_taken=step, max_norm=cap)
        w = jac - jac[k0]
        f = z - z[k0]
        norms = np.linalg.norm(w, axis=1)
        candidates = [k for k in range(z.size) if k != k0 and norms[k] > 0]
        if not candidates:
            logger.debug("DeepFool found no boundary with a nonzero gradient")
            break
        distances = np.array([abs(f[k]) / norms[k] for k in candidates])
        best = candidates[int(np.argmin(distances))]
        r_tot += (abs(f[best]) + _STEP_PAD) / norms[best] ** 2 * w[best]
        x_i = clip01(x0 + (1.0 + overshoot) * r_tot.reshape(x0.shape))

    label_now = int(np.argmax(logit_jacobian(net, x_i)[1]))
    flag = None if label_now != k0 else "max_steps"
    return finalize(net, x0, x_i, "l2", k0, y_true=y_true, queries=queries + 1,
                    steps_taken=budget.steps, flag=flag, max_norm=cap)
