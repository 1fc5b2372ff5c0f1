"""
Attack Foundations - Building Block: AttackBudget / AttackOutcome

Purpose:
    Types and helpers shared by every attack family: the budget model,
    the per-sample outcome record, input gradients of the cross-entropy,
    norm computation, epsilon-ball projections and outcome finalization
    with the uniform success rule.

Success rule:
    - untargeted: the sample was classified as its true label before the
      attack and the label after differs
    - targeted: the label after equals the target, and the target differs
      from the label before

Conventions:
    - sign(0) = 0 for every sign-based step
    - x_adv is clipped to [0,1] after each step; the achieved norm is
      measured after clipping
    - budgeted attacks require epsilon; minimizing attacks (DeepFool, JSMA,
      CW) run uncapped when epsilon is None, treat a positive epsilon as an
      acceptance cap and epsilon = 0 as "do nothing"
"""

import math
from dataclasses import dataclass, field
from typing import Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from ..core.functional import PROB_CLAMP
from ..core.tensor import Tensor, backward
from ..models.network import Network, predict_proba

NormKind = Literal["l0", "l1", "l2", "linf"]
CHANGE_TOL = 1e-12


class AttackBudget(BaseModel):
    """
    Perturbation budget of one attack run.

    Example:
        >>> AttackBudget(norm="linf", epsilon=0.1)
        AttackBudget(norm='linf', epsilon=0.1, steps=1, step_size=None)
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    norm: NormKind = "l2"
    epsilon: Optional[float] = Field(default=None, ge=0.0)
    steps: int = Field(default=1, ge=1)
    step_size: Optional[float] = Field(default=None, gt=0.0)

    @field_validator("epsilon")
    @classmethod
    def validate_epsilon(cls, v: Optional[float]) -> Optional[float]:
        if v is not None and not math.isfinite(v):
            raise ValueError("epsilon must be finite")
        return v

    def resolved_step_size(self) -> float:
        """Explicit step size, else 2.5 * epsilon / steps."""
        if self.step_size is not None:
            return self.step_size
        return 2.5 * self.required_epsilon() / self.steps

    def required_epsilon(self) -> float:
        """Epsilon of a budgeted attack (must be set)."""
        if self.epsilon is None:
            raise ValueError("this attack needs an explicit epsilon")
        return self.epsilon


@dataclass
class AttackOutcome:
    """Result of attacking one sample."""

    x_adv: np.ndarray
    eta: np.ndarray
    achieved_norm: float
    norm: str
    success: bool
    label_before: int
    label_after: int
    queries: int = 0
    target: Optional[int] = None
    steps_taken: int = 0
    flag: Optional[str] = None
    extra: dict = field(default_factory=dict)

    def as_record(self) -> dict:
        """Flat per-sample record (no arrays) for CSV/JSON reports."""
        return {
            "norm": self.norm,
            "achieved_norm": float(self.achieved_norm),
            "success": bool(self.success),
            "label_before": int(self.label_before),
            "label_after": int(self.label_after),
            "target": -1 if self.target is None else int(self.target),
            "queries": int(self.queries),
            "steps_taken": int(self.steps_taken),
            "flag": self.flag or "",
        }


def norm_of(eta: np.ndarray, kind: str) -> float:
    """l0 (changed coordinates, tolerance 1e-12), l1, l2 or linf norm of a perturbation."""
    flat = np.asarray(eta, dtype=np.float64).reshape(-1)
    if kind == "l0":
        return float(np.count_nonzero(np.abs(flat) > CHANGE_TOL))
    if kind == "l1":
        return float(np.abs(flat).sum())
    if kind == "l2":
        return float(np.sqrt((flat ** 2).sum()))
    if kind == "linf":
        return float(np.abs(flat).max(initial=0.0))
    raise ValueError(f"unknown norm {kind!r}")


def clip01(x: np.ndarray) -> np.ndarray:
    return np.clip(x, 0.0, 1.0)


def project_linf(eta: np.ndarray, epsilon: float) -> np.ndarray:
    return np.clip(eta, -epsilon, epsilon)


def project_l2(eta: np.ndarray, epsilon: float) -> np.ndarray:
    norm = np.linalg.norm(eta)
    if norm <= epsilon or norm == 0.0:
        return eta
    return eta * (epsilon / norm)


def project_l1(eta: np.ndarray, epsilon: float) -> np.ndarray:
    """Euclidean projection onto the l1 ball (sort-based simplex projection)."""
    flat = eta.reshape(-1)
    magnitude = np.abs(flat)
    if magnitude.sum() <= epsilon:
        return eta
    if epsilon == 0.0:
        return np.zeros_like(eta)
    u = np.sort(magnitude)[::-1]
    cssv = np.cumsum(u)
    ks = np.arange(1, u.size + 1)
    rho = int(np.nonzero(u * ks > cssv - epsilon)[0][-1])
    theta = (cssv[rho] - epsilon) / (rho + 1.0)
    return (np.sign(flat) * np.maximum(magnitude - theta, 0.0)).reshape(eta.shape)


PROJECTIONS = {"linf": project_linf, "l2": project_l2, "l1": project_l1}


def as_sample(net: Network, x: np.ndarray) -> np.ndarray:
    """Single sample in the network's input shape, float64."""
    x = np.asarray(x, dtype=np.float64)
    if x.size != int(np.prod(net.input_shape)):
        raise ValueError(f"expected one sample of shape {net.input_shape}, got {x.shape}")
    return x.reshape(net.input_shape)


def predict_one(net: Network, x: np.ndarray) -> Tuple[int, np.ndarray]:
    p = predict_proba(net, x.reshape((1,) + net.input_shape))[0]
    return int(np.argmax(p)), p


def ce_input_gradient(net: Network, x: np.ndarray, label: int) -> Tuple[np.ndarray, float]:
    """(d CE(label, s(x)) / dx, CE value) for one sample."""
    xt = Tensor(x.reshape((1,) + net.input_shape), requires_grad=True)
    probs = net.forward(xt)
    loss = -probs[0, label].log(clamp=PROB_CLAMP)
    grads = backward(loss, inputs=[xt], accumulate=False)
    grad = grads[xt].reshape(net.input_shape) if xt in grads else np.zeros(net.input_shape)
    return grad, loss.item()


def least_likely_class(p: np.ndarray, exclude: Optional[int] = None) -> int:
    scores = np.array(p, dtype=np.float64)
    if exclude is not None:
        scores[exclude] = np.inf
    return int(np.argmin(scores))


def runner_up_class(p: np.ndarray) -> int:
    order = np.argsort(-p, kind="stable")
    return int(order[1])


def no_op(x: np.ndarray, label_before: int, norm: str, flag: str,
          target: Optional[int] = None, queries: int = 1) -> AttackOutcome:
    return AttackOutcome(
        x_adv=x.copy(), eta=np.zeros_like(x), achieved_norm=0.0, norm=norm,
        success=False, label_before=label_before, label_after=label_before,
        queries=queries, target=target, flag=flag,
    )


def finalize(net: Network, x: np.ndarray, x_adv: np.ndarray, norm: str, label_before: int,
             y_true: Optional[int] = None, target: Optional[int] = None, queries: int = 0,
             steps_taken: int = 0, flag: Optional[str] = None,
             max_norm: Optional[float] = None) -> AttackOutcome:
    """
    Clip, re-classify and apply the uniform success rule.

    ``max_norm`` (minimizing attacks) turns an over-budget success into a
    failure flagged "over_budget".
    """
    x_adv = clip01(x_adv)
    eta = x_adv - x
    label_after, _ = predict_one(net, x_adv)
    if target is not None:
        success = label_after == target and target != label_before
    else:
        reference = label_before if y_true is None else y_true
        success = label_before == reference and label_after != label_before
    achieved = norm_of(eta, norm)
    if success and max_norm is not None and achieved > max_norm:
        success, flag = False, "over_budget"
    return AttackOutcome(
        x_adv=x_adv, eta=eta, achieved_norm=achieved, norm=norm, success=bool(success),
        label_before=label_before, label_after=label_after, queries=queries + 1,
        target=target, steps_taken=steps_taken, flag=flag,
    )


def prepare(net: Network, x: np.ndarray, y_true: Optional[int], norm: str,
            target: Optional[int] = None) -> Tuple[np.ndarray, int, np.ndarray, Optional[AttackOutcome]]:
    """
    Common attack preamble.

    Returns (x, label_before, probabilities, early outcome); the early outcome
    is set when the sample is already misclassified.
    """
    x = as_sample(net, x)
    label_before, p = predict_one(net, x)
    if y_true is not None and label_before != int(y_true):
        return x, label_before, p, no_op(x, label_before, norm, "already_misclassified", target)
    return x, label_before, p, None
