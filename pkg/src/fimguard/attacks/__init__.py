"""Adversarial attacks: spectral, gradient-based and norm-minimizing families."""

from .base import AttackBudget, AttackOutcome, norm_of
from .cw import attack_cw_l2
from .deepfool import attack_deepfool
from .gradient import attack_bim, attack_fgm, attack_fgsm, attack_otcm, attack_pgd
from .jsma import attack_jsma
from .registry import ATTACKS, AttackConfig, AttackSpec, attack_names, run_attack
from .spectral import attack_ossa

__all__ = [
    "ATTACKS",
    "AttackBudget",
    "AttackConfig",
    "AttackOutcome",
    "AttackSpec",
    "attack_bim",
    "attack_cw_l2",
    "attack_deepfool",
    "attack_fgm",
    "attack_fgsm",
    "attack_jsma",
    "attack_names",
    "attack_ossa",
    "attack_otcm",
    "attack_pgd",
    "norm_of",
    "run_attack",
]
