"""
Layers - Building Block: Layer

Purpose:
    The layer types a Network is assembled from. Each layer owns its
    parameters (Tensors) and buffers (numpy arrays, e.g. BN running stats)
    and describes itself for the checkpoint manifest.

Input Data:
    - Tensor batch (N, ...) and the ``training`` flag

Output Data:
    - Tensor batch
"""

from typing import Any, Dict, List, Tuple

import numpy as np

from ..core import functional as F
from ..core.tensor import Tensor


class Layer:
    """Base layer: stateless unless a subclass registers parameters or buffers."""

    kind = "layer"

    def forward(self, x: Tensor, training: bool = False) -> Tensor:
        raise NotImplementedError

    def parameters(self) -> List[Tuple[str, Tensor]]:
        return []

    def buffers(self) -> List[Tuple[str, np.ndarray]]:
        return []

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind}

    def reset(self, rng: np.random.Generator) -> None:
        """Re-initialize parameters from ``rng`` (no-op for stateless layers)."""

    def astype(self, dtype: Any) -> None:
        for _, p in self.parameters():
            p.data = p.data.astype(dtype)


def _fan_in_uniform(rng: np.random.Generator, shape: Tuple[int, ...], fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Conv2d(Layer):
    kind = "conv2d"

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int,
                 stride: int = 1, padding: int = 0):
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.stride = stride
        self.padding = padding
        self.weight = Tensor(np.zeros((out_channels, in_channels, kernel_size, kernel_size)),
                             requires_grad=True)
        self.bias = Tensor(np.zeros(out_channels), requires_grad=True)

    def reset(self, rng: np.random.Generator) -> None:
        fan_in = self.in_channels * self.kernel_size ** 2
        self.weight.data = _fan_in_uniform(rng, self.weight.shape, fan_in)
        self.bias.data = _fan_in_uniform(rng, self.bias.shape, fan_in)

    def forward(self, x: Tensor, training: bool = False) -> Tensor:
        return F.conv2d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)

    def parameters(self) -> List[Tuple[str, Tensor]]:
        return [("weight", self.weight), ("bias", self.bias)]

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind, "in_channels": self.in_channels,
                "out_channels": self.out_channels, "kernel_size": self.kernel_size,
                "stride": self.stride, "padding": self.padding}


class BatchNorm(Layer):
    """Batch norm over channels; running statistics are checkpointed buffers."""

    kind = "batch_norm"

    def __init__(self, channels: int, momentum: float = 0.1, eps: float = 1e-5):
        self.channels = channels
        self.momentum = momentum
        self.eps = eps
        self.gamma = Tensor(np.ones(channels), requires_grad=True)
        self.beta = Tensor(np.zeros(channels), requires_grad=True)
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)

    def reset(self, rng: np.random.Generator) -> None:
        self.gamma.data = np.ones(self.channels)
        self.beta.data = np.zeros(self.channels)
        self.running_mean = np.zeros(self.channels)
        self.running_var = np.ones(self.channels)

    def forward(self, x: Tensor, training: bool = False) -> Tensor:
        return F.batch_norm(x, self.gamma, self.beta, self.running_mean, self.running_var,
                            training=training, momentum=self.momentum, eps=self.eps)

    def parameters(self) -> List[Tuple[str, Tensor]]:
        return [("gamma", self.gamma), ("beta", self.beta)]

    def buffers(self) -> List[Tuple[str, np.ndarray]]:
        return [("running_mean", self.running_mean), ("running_var", self.running_var)]

    def set_buffer(self, name: str, value: np.ndarray) -> None:
        if name not in ("running_mean", "running_var"):
            raise KeyError(name)
        setattr(self, name, np.array(value, dtype=getattr(self, name).dtype, copy=True))

    def astype(self, dtype: Any) -> None:
        super().astype(dtype)
        self.running_mean = self.running_mean.astype(dtype)
        self.running_var = self.running_var.astype(dtype)

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind, "channels": self.channels,
                "momentum": self.momentum, "eps": self.eps}


class ReLU(Layer):
    kind = "relu"

    def forward(self, x: Tensor, training: bool = False) -> Tensor:
        return F.relu(x)


class MaxPool2d(Layer):
    kind = "maxpool2d"

    def __init__(self, size: int = 2):
        self.size = size

    def forward(self, x: Tensor, training: bool = False) -> Tensor:
        return F.maxpool2d(x, self.size)

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind, "size": self.size}


class Flatten(Layer):
    kind = "flatten"

    def forward(self, x: Tensor, training: bool = False) -> Tensor:
        return F.flatten(x)


class Linear(Layer):
    """Fully-connected layer y = x @ W + b with W stored as (in, out)."""

    kind = "linear"

    def __init__(self, in_features: int, out_features: int):
        self.in_features = in_features
        self.out_features = out_features
        self.weight = Tensor(np.zeros((in_features, out_features)), requires_grad=True)
        self.bias = Tensor(np.zeros(out_features), requires_grad=True)

    def reset(self, rng: np.random.Generator) -> None:
        self.weight.data = _fan_in_uniform(rng, self.weight.shape, self.in_features)
        self.bias.data = _fan_in_uniform(rng, self.bias.shape, self.in_features)

    def forward(self, x: Tensor, training: bool = False) -> Tensor:
        return x @ self.weight + self.bias

    def parameters(self) -> List[Tuple[str, Tensor]]:
        return [("weight", self.weight), ("bias", self.bias)]

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind, "in_features": self.in_features,
                "out_features": self.out_features}
