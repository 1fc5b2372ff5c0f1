"""
Shared CLI plumbing: datasets and networks from a RunConfig, checkpoint
loading with shape checks, and run identifiers.
"""

from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np

from ..config.run_config import RunConfig
from ..data.datasets import LabeledDataset, load_mnist_split, synthetic_split
from ..errors import ConfigError, DataConsistencyError
from ..models.checkpoint import load_checkpoint
from ..models.network import Network, build_convnet, build_mlp
from ..utils.logger import setup_logger
from ..utils.timestamp import compact_stamp

logger = setup_logger(__name__)

CHECKPOINT_NAME = "model.ckpt"
TRAINLOG_NAME = "trainlog.csv"


def new_run_id(command: str) -> str:
    return f"{command}-{compact_stamp()}"


def load_datasets(cfg: RunConfig) -> Tuple[LabeledDataset, LabeledDataset]:
    """(train, test) per ``cfg.data``."""
    data = cfg.data
    if data.source == "synthetic":
        s = data.synthetic
        return synthetic_split(s.num_classes, s.per_class, s.test_per_class, s.dim,
                               s.seed, noise=s.noise)
    train, test = load_mnist_split(data.resolved_data_dir, data.train_limit, data.test_limit)
    logger.info("MNIST loaded", extra={"train": len(train), "test": len(test),
                                       "data_dir": data.resolved_data_dir})
    return train, test


def build_network(cfg: RunConfig, input_shape: Tuple[int, ...], num_classes: int) -> Network:
    model = cfg.model
    try:
        if model.arch == "convnet":
            return build_convnet(tuple(input_shape), num_classes, seed=model.seed)
        return build_mlp(int(np.prod(input_shape)), model.hidden_dims, num_classes,
                         seed=model.seed, input_shape=tuple(input_shape))
    except ValueError as exc:
        raise ConfigError(f"model {model.arch} does not fit the data: {exc}") from exc


def load_compatible(paths: Sequence[str], dataset: LabeledDataset) -> List[Network]:
    """
    Load checkpoints and check they accept ``dataset``.

    Raises:
        DataConsistencyError: input shape or class count differs from the dataset
    """
    nets = []
    for path in paths:
        net = load_checkpoint(path)
        if tuple(net.input_shape) != tuple(dataset.input_shape):
            raise DataConsistencyError(
                f"{path} expects inputs {net.input_shape}, data has {dataset.input_shape}"
            )
        if net.num_classes != dataset.num_classes:
            raise DataConsistencyError(
                f"{path} has {net.num_classes} classes, data has {dataset.num_classes}"
            )
        nets.append(net)
    return nets


def model_ids(paths: Sequence[str]) -> List[str]:
    """Readable unique ids: the checkpoint's parent directory name, else its stem."""
    ids: List[str] = []
    for path in paths:
        p = Path(path)
        base = p.parent.name if p.stem == Path(CHECKPOINT_NAME).stem and p.parent.name else p.stem
        candidate, n = base, 2
        while candidate in ids:
            candidate, n = f"{base}-{n}", n + 1
        ids.append(candidate)
    return ids
