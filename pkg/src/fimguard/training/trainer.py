"""
Trainer - Building Block: train

Purpose:
    Training loops for three regimes sharing one code path:
    - baseline: batch-mean cross-entropy
    - fim: cross-entropy + mu * sum_i 1/clamp(p_i) (Fisher-trace penalty)
    - lsr: cross-entropy against smoothed labels y(1 - alpha) + alpha / K

Input Data:
    - net: Network (parameters are updated in place)
    - dataset: LabeledDataset; optional held-out set for per-epoch metrics
    - TrainConfig

Output Data:
    - the trained Network, frozen with its BN running statistics fixed
    - TrainLog: per-epoch loss, ce, reg, test_acc, mean_maxp (CSV via pandas)

Setup/Configuration:
    - run config section "train" (regime, mu, alpha, epochs, batch_size, lr,
      momentum, seed, precision)
    - SGD with momentum; lr x0.1 from epoch floor(2/3 * epochs)
"""

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, List, Literal, Optional, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..core.functional import PROB_CLAMP, cross_entropy, one_hot, reciprocal_safe
from ..core.tensor import Tensor, backward, get_default_dtype, no_grad, set_default_dtype
from ..data.datasets import BatchPlan, LabeledDataset, batches
from ..errors import DivergenceError, EmptySampleSetError
from ..models.network import Network, classify, predict_proba
from ..utils.logger import setup_logger
from .optim import SGD

logger = setup_logger(__name__)

EVAL_CHUNK = 500
LOG_COLUMNS = ["epoch", "loss", "ce", "reg", "test_acc", "mean_maxp"]


class TrainConfig(BaseModel):
    """
    Training hyperparameters.

    Example:
        >>> TrainConfig(regime="fim", mu=0.022, epochs=3)
    """

    model_config = ConfigDict(extra="forbid")

    regime: Literal["baseline", "fim", "lsr"] = "baseline"
    mu: float = Field(default=0.0, ge=0.0)
    alpha: float = Field(default=0.1, gt=0.0, lt=1.0)
    epochs: int = Field(default=3, ge=1)
    batch_size: int = Field(default=64, ge=1)
    lr: float = Field(default=0.05, gt=0.0)
    momentum: float = Field(default=0.9, ge=0.0, lt=1.0)
    seed: int = 0
    precision: Literal["float64", "float32"] = "float64"

    @model_validator(mode="after")
    def check_regime(self) -> "TrainConfig":
        if self.regime != "fim" and self.mu != 0.0:
            raise ValueError(f"mu applies only to the fim regime, got regime={self.regime}")
        return self

    @property
    def effective_mu(self) -> float:
        return self.mu if self.regime == "fim" else 0.0

    @property
    def decay_epoch(self) -> int:
        return max(1, (2 * self.epochs) // 3)


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    ce: float
    reg: float
    test_acc: float
    mean_maxp: float


@dataclass
class TrainLog:
    """Per-epoch training metrics; ``ce + mu * reg == loss`` on every row."""

    mu: float = 0.0
    records: List[EpochRecord] = field(default_factory=list)

    def append(self, record: EpochRecord) -> None:
        self.records.append(record)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(r) for r in self.records], columns=LOG_COLUMNS)

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format="%.17g")
        return path

    def __len__(self) -> int:
        return len(self.records)


@dataclass
class LossBreakdown:
    total: Tensor
    ce: float
    reg: float


def lsr_labels(y: np.ndarray, alpha: float) -> np.ndarray:
    """
    Label-smoothed targets y * (1 - alpha) + alpha / K.

    ``y`` is a one-hot row or a (B, K) matrix of one-hot rows.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    y = np.asarray(y, dtype=np.float64)
    return y * (1.0 - alpha) + alpha / y.shape[-1]


def fisher_trace_penalty(probs: Tensor) -> Tensor:
    """Per-sample sum_i 1/clamp(p_i); a (B,) Tensor."""
    return reciprocal_safe(probs, clamp=PROB_CLAMP).sum(axis=-1)


def loss_breakdown(probs: Tensor, labels: np.ndarray, mu: float,
                   targets: Optional[np.ndarray] = None) -> LossBreakdown:
    """
    Batch-mean loss and its two components.

    The penalty enters the graph only for mu > 0, so mu = 0 yields exactly
    the batch-mean cross-entropy.
    """
    if targets is None:
        targets = one_hot(labels, probs.shape[-1])
    ce = cross_entropy(probs, targets.astype(probs.dtype, copy=False)).mean()
    if mu > 0.0:
        reg = fisher_trace_penalty(probs).mean()
        total = ce + mu * reg
        reg_value = reg.item()
    else:
        total = ce
        with no_grad():
            reg_value = fisher_trace_penalty(probs.detach()).mean().item()
    return LossBreakdown(total=total, ce=ce.item(), reg=reg_value)


def regularized_loss(probs: Tensor, labels: np.ndarray, mu: float) -> Tensor:
    """Batch mean of CE(y, p) + mu * sum_i 1/clamp(p_i)."""
    return loss_breakdown(probs, labels, mu).total


def evaluate_accuracy(net: Network, dataset: LabeledDataset, chunk: int = EVAL_CHUNK) -> float:
    """Fraction of argmax-correct predictions (BN in inference mode)."""
    if len(dataset) == 0:
        raise EmptySampleSetError("cannot evaluate accuracy on an empty dataset")
    correct = 0
    for start in range(0, len(dataset), chunk):
        predicted = classify(net, dataset.images[start:start + chunk])
        correct += int((predicted == dataset.labels[start:start + chunk]).sum())
    return correct / len(dataset)


def mean_max_probability(net: Network, dataset: LabeledDataset, chunk: int = EVAL_CHUNK) -> float:
    if len(dataset) == 0:
        raise EmptySampleSetError("cannot average over an empty dataset")
    total = 0.0
    for start in range(0, len(dataset), chunk):
        total += float(predict_proba(net, dataset.images[start:start + chunk]).max(axis=1).sum())
    return total / len(dataset)


EpochCallback = Callable[[EpochRecord, int], None]


def train(net: Network, dataset: LabeledDataset, config: TrainConfig,
          eval_set: Optional[LabeledDataset] = None,
          on_epoch: Optional[EpochCallback] = None) -> tuple:
    """
    Train ``net`` in place and return (net, TrainLog).

    Args:
        eval_set: held-out set for test_acc / mean_maxp (default: ``dataset``)
        on_epoch: called with (record, epochs) after each epoch

    Raises:
        EmptySampleSetError: empty dataset
        DivergenceError: non-finite loss (names the epoch and batch)
    """
    if len(dataset) == 0:
        raise EmptySampleSetError("cannot train on an empty dataset")
    eval_set = eval_set if eval_set is not None else dataset
    mu = config.effective_mu
    dtype = np.float32 if config.precision == "float32" else np.float64
    previous_dtype = get_default_dtype()
    set_default_dtype(dtype)
    net.astype(dtype).unfreeze()
    optimizer = SGD(net.parameters(), lr=config.lr, momentum=config.momentum,
                    decay_epoch=config.decay_epoch)
    batch_size = min(config.batch_size, len(dataset))
    log = TrainLog(mu=mu)

    logger.info("Training started", extra={
        "regime": config.regime, "mu": mu, "epochs": config.epochs,
        "samples": len(dataset), "precision": config.precision,
    })
    try:
        for epoch in range(config.epochs):
            lr = optimizer.set_epoch(epoch)
            plan = BatchPlan(batch_size=batch_size, seed=config.seed, epoch=epoch)
            sums = np.zeros(3)
            for index, (images, labels) in enumerate(batches(dataset, plan)):
                targets = None
                if config.regime == "lsr":
                    targets = lsr_labels(one_hot(labels, dataset.num_classes), config.alpha)
                probs = net.forward(images.astype(dtype), training=True)
                parts = loss_breakdown(probs, labels, mu, targets)
                value = parts.total.item()
                if not np.isfinite(value):
                    raise DivergenceError(epoch + 1, index, value)
                params = net.parameters()
                grads = backward(parts.total, inputs=params, accumulate=False)
                optimizer.step([grads.get(p) for p in params])
                sums += len(labels) * np.array([value, parts.ce, parts.reg])
            loss, ce, reg = sums / len(dataset)
            record = EpochRecord(
                epoch=epoch + 1, loss=float(loss), ce=float(ce), reg=float(reg),
                test_acc=evaluate_accuracy(net, eval_set),
                mean_maxp=mean_max_probability(net, eval_set),
            )
            log.append(record)
            logger.info("Epoch finished", extra={**asdict(record), "lr": lr})
            if on_epoch is not None:
                on_epoch(record, config.epochs)
    finally:
        set_default_dtype(previous_dtype)
        net.astype(np.float64)
        net.freeze()
    return net, log
