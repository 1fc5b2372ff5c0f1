"""
Attack Registry - Building Block: run_attack

Purpose:
    Name -> attack lookup shared by the CLI and the evaluation harness, plus
    the pydantic AttackConfig that run configurations carry.

Families:
    - budgeted: FGSM, FGM, OTCM, BIM, PGD, OSSA (epsilon is a hard bound)
    - minimizing: DeepFool, JSMA, CW-l2 (the norm is an output; epsilon, when
      given, caps the accepted norm)
"""

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from ..models.network import Network
from .base import AttackBudget, AttackOutcome, NormKind
from .cw import DEFAULT_C, DEFAULT_KAPPA, DEFAULT_LR, DEFAULT_STEPS, attack_cw_l2
from .deepfool import DEFAULT_MAX_STEPS, DEFAULT_OVERSHOOT, attack_deepfool
from .gradient import attack_bim, attack_fgm, attack_fgsm, attack_otcm, attack_pgd
from .jsma import DEFAULT_THETA, attack_jsma
from .spectral import attack_ossa

DEFAULT_ITERATIVE_STEPS = 10


class AttackConfig(BaseModel):
    """
    One attack entry of a run configuration.

    Example:
        >>> AttackConfig(name="bim", norm="l2", epsilon_grid=[0.5, 1.0], steps=10)
    """

    model_config = ConfigDict(extra="forbid")

    name: str
    norm: Optional[NormKind] = None
    epsilon: Optional[float] = Field(default=None, ge=0.0)
    epsilon_grid: List[float] = Field(default_factory=list)
    steps: Optional[int] = Field(default=None, ge=1)
    step_size: Optional[float] = Field(default=None, gt=0.0)
    seed: int = 0
    target: Optional[int] = Field(default=None, ge=0)
    overshoot: float = Field(default=DEFAULT_OVERSHOOT, ge=0.0)
    theta: float = DEFAULT_THETA
    c: float = Field(default=DEFAULT_C, ge=0.0)
    lr: float = Field(default=DEFAULT_LR, gt=0.0)
    kappa: float = Field(default=DEFAULT_KAPPA, ge=0.0)
    eps_max: Optional[float] = Field(default=None, gt=0.0)

    @field_validator("name")
    @classmethod
    def validate_name(cls, v: str) -> str:
        key = v.strip().lower()
        if key not in ATTACKS:
            raise ValueError(f"unknown attack {v!r}; valid names: {', '.join(attack_names())}")
        return key

    @field_validator("epsilon_grid")
    @classmethod
    def validate_grid(cls, v: List[float]) -> List[float]:
        if any(e < 0 for e in v):
            raise ValueError("epsilon grid values must be nonnegative")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("epsilon grid must be strictly increasing")
        return v

    @property
    def spec(self) -> "AttackSpec":
        return ATTACKS[self.name]

    @property
    def resolved_norm(self) -> str:
        return self.norm or self.spec.default_norm

    def budget(self, epsilon: Optional[float] = None) -> AttackBudget:
        spec = self.spec
        norm = self.resolved_norm
        if norm not in spec.norms:
            raise ValueError(f"attack {self.name} supports {spec.norms}, got {norm}")
        return AttackBudget(
            norm=norm,
            epsilon=self.epsilon if epsilon is None else float(epsilon),
            steps=self.steps or spec.default_steps,
            step_size=self.step_size,
        )


Runner = Callable[[Network, np.ndarray, int, AttackBudget, AttackConfig, int], AttackOutcome]


@dataclass(frozen=True)
class AttackSpec:
    name: str
    runner: Runner
    family: str
    default_norm: str
    norms: tuple
    targeted: bool = False
    default_steps: int = 1


def _ossa(net, x, y, budget, config, index):
    return attack_ossa(net, x, y, budget)


def _fgsm(net, x, y, budget, config, index):
    return attack_fgsm(net, x, y, budget)


def _fgm(net, x, y, budget, config, index):
    return attack_fgm(net, x, y, budget)


def _otcm(net, x, y, budget, config, index):
    return attack_otcm(net, x, config.target, budget, y_true=y)


def _bim(net, x, y, budget, config, index):
    return attack_bim(net, x, y, budget)


def _pgd(net, x, y, budget, config, index):
    return attack_pgd(net, x, y, budget, seed=config.seed ^ index)


def _deepfool(net, x, y, budget, config, index):
    return attack_deepfool(net, x, budget, y_true=y, overshoot=config.overshoot)


def _jsma(net, x, y, budget, config, index):
    return attack_jsma(net, x, config.target, budget, theta=config.theta, y_true=y)


def _cw(net, x, y, budget, config, index):
    return attack_cw_l2(net, x, y, budget, c=config.c, kappa=config.kappa, lr=config.lr)


ATTACKS: Dict[str, AttackSpec] = {
    "ossa": AttackSpec("ossa", _ossa, "budgeted", "l2", ("l2",)),
    "fgsm": AttackSpec("fgsm", _fgsm, "budgeted", "linf", ("linf",)),
    "fgm": AttackSpec("fgm", _fgm, "budgeted", "l2", ("l2",)),
    "otcm": AttackSpec("otcm", _otcm, "budgeted", "linf", ("linf", "l2"), targeted=True),
    "bim": AttackSpec("bim", _bim, "budgeted", "linf", ("l1", "l2", "linf"),
                      default_steps=DEFAULT_ITERATIVE_STEPS),
    "pgd": AttackSpec("pgd", _pgd, "budgeted", "linf", ("linf",),
                      default_steps=DEFAULT_ITERATIVE_STEPS),
    "deepfool": AttackSpec("deepfool", _deepfool, "minimizing", "l2", ("l2",),
                           default_steps=DEFAULT_MAX_STEPS),
    "jsma": AttackSpec("jsma", _jsma, "minimizing", "l0", ("l0",), targeted=True),
    "cw": AttackSpec("cw", _cw, "minimizing", "l2", ("l2",), default_steps=DEFAULT_STEPS),
}


def attack_names() -> List[str]:
    return sorted(ATTACKS)


def run_attack(net: Network, x: np.ndarray, y_true: int, config: AttackConfig,
               epsilon: Optional[float] = None, index: int = 0) -> AttackOutcome:
    """
    Run one configured attack on one sample.

    Args:
        epsilon: overrides ``config.epsilon`` (grid points, bisection points)
        index: sample index; seeded attacks use ``config.seed ^ index``
    """
    budget = config.budget(epsilon)
    return config.spec.runner(net, x, int(y_true), budget, config, index)
