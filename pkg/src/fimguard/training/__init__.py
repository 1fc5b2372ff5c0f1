"""Training regimes (baseline, Fisher-trace penalty, label smoothing) and optimizers."""

from .optim import SGD, Adam
from .trainer import (
    EpochRecord,
    TrainConfig,
    TrainLog,
    evaluate_accuracy,
    fisher_trace_penalty,
    loss_breakdown,
    lsr_labels,
    mean_max_probability,
    regularized_loss,
    train,
)

__all__ = [
    "Adam",
    "EpochRecord",
    "SGD",
    "TrainConfig",
    "TrainLog",
    "evaluate_accuracy",
    "fisher_trace_penalty",
    "loss_breakdown",
    "lsr_labels",
    "mean_max_probability",
    "regularized_loss",
    "train",
]
