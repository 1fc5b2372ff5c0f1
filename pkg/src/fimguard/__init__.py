"""
fimguard
========

Fisher-information toolkit for softmax classifiers:

- core: reverse-mode tensor engine over numpy
- fim: output/input Fisher information, eigen solvers, the OSSA direction
- models: MLP and ConvNet classifiers, checkpoint persistence
- training: baseline, Fisher-trace penalty and label-smoothing regimes
- attacks: OSSA, FGSM/FGM, OTCM, BIM, PGD, DeepFool, JSMA, CW-l2
- evaluation: fooling curves, adversarial distance, transfer, invariant suite
- cli: ``fimguard train|attack|eval|verify``

Usage:
    >>> from fimguard import build_mlp, output_fim
    >>> net = build_mlp(4, [8], 3, seed=0)
"""

__version__ = "0.1.0"

from .attacks import ATTACKS, AttackConfig, AttackOutcome, run_attack
from .data import LabeledDataset, load_mnist_split, synthetic_split
from .evaluation import (
    RobustnessReport,
    cross_model_transfer,
    fooling_curve,
    mean_adv_distance,
    run_verify_suite,
)
from .fim import input_jacobian, ossa_direction, output_fim
from .models import Network, build_convnet, build_mlp, load_checkpoint, save_checkpoint
from .training import TrainConfig, train

__all__ = [
    "ATTACKS",
    "AttackConfig",
    "AttackOutcome",
    "LabeledDataset",
    "Network",
    "RobustnessReport",
    "TrainConfig",
    "__version__",
    "build_convnet",
    "build_mlp",
    "cross_model_transfer",
    "fooling_curve",
    "input_jacobian",
    "load_checkpoint",
    "load_mnist_split",
    "mean_adv_distance",
    "ossa_direction",
    "output_fim",
    "run_attack",
    "run_verify_suite",
    "save_checkpoint",
    "synthetic_split",
    "train",
]
