"""
One-step spectral attack: move by epsilon (l2 length) along the top
eigenvector of the input Fisher matrix, signed to increase the loss.
"""

import numpy as np

from ..fim.metric import ossa_direction
from ..models.network import Network
from .base import AttackBudget, AttackOutcome, clip01, finalize, no_op, prepare


def attack_ossa(net: Network, x: np.ndarray, y_true: int, budget: AttackBudget) -> AttackOutcome:
    """
    x_adv = clip(x + epsilon * eta_unit).

    A degenerate spectral direction returns the input unchanged, flagged.
    The reduced-matrix eigenvalue is kept in ``outcome.extra["lambda_max"]``.
    """
    x, label_before, _, early = prepare(net, x, y_true, "l2")
    if early is not None:
        return early
    if budget.required_epsilon() == 0.0:
        return no_op(x, label_before, "l2", "zero_budget")
    spectral = ossa_direction(net, x, y_true=int(y_true))
    if spectral.degenerate:
        outcome = no_op(x, label_before, "l2", f"degenerate:{spectral.reason}",
                        queries=spectral.reduced_matrix.shape[0] + 3)
        outcome.extra["lambda_max"] = spectral.lambda_max
        return outcome
    x_adv = clip01(x + budget.epsilon * spectral.eta_unit)
    outcome = finalize(net, x, x_adv, "l2", label_before, y_true=y_true,
                       queries=spectral.reduced_matrix.shape[0] + 3, steps_taken=1)
    outcome.extra["lambda_max"] = spectral.lambda_max
    return outcome
