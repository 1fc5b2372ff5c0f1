"""
Classifier Networks - Building Block: Network

Purpose:
    Ordered layer stack ending in a softmax, the two reference architectures
    (ConvNet with batch normalization, fully-connected MLP) and the
    inference helpers predict_proba / classify.

Input Data:
    - batch of inputs (B, ...) in [0,1]
    - ``training`` flag: BN batch statistics + running-stat updates when True,
      running statistics otherwise

Output Data:
    - logits (B, K) and probability rows (B, K) on the simplex

Setup/Configuration:
    - run config ``model`` section: arch (convnet|mlp), hidden_dims, seed

Concurrency:
    A frozen Network is read-only during forward passes with training=False
    and can be shared between threads.
"""

import hashlib
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..core.tensor import Tensor, no_grad
from ..errors import ShapeError
from .layers import BatchNorm, Conv2d, Flatten, Layer, Linear, MaxPool2d, ReLU

InputLike = Union[Tensor, np.ndarray]


class Network:
    """
    Layer stack followed by softmax over the last axis.

    Parameters are named "<layer index>.<param name>" (e.g. "0.weight"),
    which keeps names unique and stable across save/load.

    Example:
        >>> net = build_mlp(4, [8], 3, seed=0)
        >>> predict_proba(net, np.zeros((2, 4))).shape
        (2, 3)
    """

    def __init__(self, layers: Sequence[Layer], input_shape: Tuple[int, ...],
                 num_classes: int, architecture: Dict[str, Any]):
        self.layers: List[Layer] = list(layers)
        self.input_shape = tuple(int(s) for s in input_shape)
        self.num_classes = int(num_classes)
        self.architecture = dict(architecture)

    # Forward passes
    def _as_input(self, x: InputLike) -> Tensor:
        tensor = x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=self.dtype))
        trailing = tensor.shape[1:]
        if tensor.ndim < 2 or int(np.prod(trailing)) != int(np.prod(self.input_shape)):
            raise ShapeError(
                f"expected a batch of inputs shaped {self.input_shape}, got {tensor.shape}"
            )
        if trailing != self.input_shape:
            tensor = tensor.reshape((tensor.shape[0],) + self.input_shape)
        return tensor

    def forward_logits(self, x: InputLike, training: bool = False) -> Tensor:
        out = self._as_input(x)
        for layer in self.layers:
            out = layer.forward(out, training=training)
        return out

    def forward(self, x: InputLike, training: bool = False) -> Tensor:
        return self.forward_logits(x, training=training).softmax()

    __call__ = forward

    # Parameters and state
    def named_parameters(self) -> Iterator[Tuple[str, Tensor]]:
        for index, layer in enumerate(self.layers):
            for name, param in layer.parameters():
                yield f"{index}.{name}", param

    def parameters(self) -> List[Tensor]:
        return [p for _, p in self.named_parameters()]

    def named_state(self) -> List[Tuple[str, np.ndarray, str]]:
        """Every checkpointed array as (name, array, "param" | "buffer"), in manifest order."""
        state: List[Tuple[str, np.ndarray, str]] = []
        for index, layer in enumerate(self.layers):
            for name, param in layer.parameters():
                state.append((f"{index}.{name}", param.data, "param"))
            for name, buf in layer.buffers():
                state.append((f"{index}.{name}", buf, "buffer"))
        return state

    def load_state(self, arrays: Dict[str, np.ndarray]) -> None:
        """Copy arrays into parameters and buffers by name (shapes must match)."""
        for index, layer in enumerate(self.layers):
            for name, param in layer.parameters():
                value = arrays[f"{index}.{name}"]
                param.data = np.array(value, dtype=param.data.dtype, copy=True).reshape(param.shape)
            for name, _ in layer.buffers():
                layer.set_buffer(name, arrays[f"{index}.{name}"])  # type: ignore[attr-defined]

    def parameter_count(self) -> int:
        return sum(p.size for p in self.parameters())

    @property
    def dtype(self) -> np.dtype:
        params = self.parameters()
        return params[0].dtype if params else np.dtype(np.float64)

    def astype(self, dtype: Any) -> "Network":
        for layer in self.layers:
            layer.astype(dtype)
        return self

    def freeze(self) -> "Network":
        """Take parameters off the tape; gradients then flow only to inputs."""
        for p in self.parameters():
            p.requires_grad = False
            p.grad = None
        return self

    def unfreeze(self) -> "Network":
        for p in self.parameters():
            p.requires_grad = True
        return self

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def checkpoint_hash(self) -> str:
        """sha256 hex digest of the little-endian float64 weights blob."""
        digest = hashlib.sha256()
        for _, array, _ in self.named_state():
            digest.update(np.ascontiguousarray(array, dtype="<f8").tobytes())
        return digest.hexdigest()

    def final_linear(self) -> Linear:
        for layer in reversed(self.layers):
            if isinstance(layer, Linear):
                return layer
        raise ShapeError("network has no fully-connected layer")

    def __repr__(self) -> str:
        kinds = " -> ".join(layer.kind for layer in self.layers)
        return f"Network({self.architecture.get('name')}: {kinds} -> softmax)"


def _initialized(net: Network, seed: int) -> Network:
    rng = np.random.default_rng(seed)
    for layer in net.layers:
        layer.reset(rng)
    return net


def build_convnet(input_shape: Tuple[int, ...] = (1, 28, 28), num_classes: int = 10,
                  seed: int = 0) -> Network:
    """
    Reference ConvNet: two conv+BN+relu+pool blocks and one FC layer.

    conv(16, 5x5, pad 2) -> BN -> relu -> maxpool(2) -> conv(32, 5x5, pad 2)
    -> BN -> relu -> maxpool(2) -> flatten -> FC(K) -> softmax
    """
    if num_classes < 2:
        raise ValueError(f"num_classes must be >= 2, got {num_classes}")
    channels, height, width = input_shape
    if height % 4 or width % 4:
        raise ValueError(f"input height/width must be divisible by 4, got {input_shape}")
    layers: List[Layer] = [
        Conv2d(channels, 16, 5, padding=2), BatchNorm(16), ReLU(), MaxPool2d(2),
        Conv2d(16, 32, 5, padding=2), BatchNorm(32), ReLU(), MaxPool2d(2),
        Flatten(), Linear(32 * (height // 4) * (width // 4), num_classes),
    ]
    architecture = {"name": "convnet", "input_shape": list(input_shape),
                    "num_classes": num_classes, "seed": seed,
                    "layers": [layer.describe() for layer in layers]}
    return _initialized(Network(layers, input_shape, num_classes, architecture), seed)


def build_mlp(input_dim: int, hidden_dims: Sequence[int], num_classes: int, seed: int = 0,
              input_shape: Optional[Tuple[int, ...]] = None) -> Network:
    """
    Fully-connected relu stack ending in FC(K); hidden_dims=[] is multinomial
    logistic regression.

    ``input_shape`` lets the network accept image-shaped batches whose
    product equals ``input_dim`` (defaults to (input_dim,)).
    """
    dims = [input_dim, *hidden_dims]
    if any(d <= 0 for d in dims) or num_classes < 2:
        raise ValueError(f"dimensions must be positive and K >= 2 (dims={dims}, K={num_classes})")
    shape = tuple(input_shape) if input_shape is not None else (input_dim,)
    if int(np.prod(shape)) != input_dim:
        raise ValueError(f"input_shape {shape} does not hold {input_dim} values")
    layers: List[Layer] = [Flatten()]
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        layers += [Linear(fan_in, fan_out), ReLU()]
    layers.append(Linear(dims[-1], num_classes))
    architecture = {"name": "mlp", "input_dim": input_dim, "hidden_dims": list(hidden_dims),
                    "input_shape": list(shape), "num_classes": num_classes, "seed": seed,
                    "layers": [layer.describe() for layer in layers]}
    return _initialized(Network(layers, shape, num_classes, architecture), seed)


def build_from_architecture(architecture: Dict[str, Any]) -> Network:
    """Rebuild an uninitialized-equivalent network from its descriptor."""
    name = architecture.get("name")
    seed = int(architecture.get("seed", 0))
    if name == "convnet":
        return build_convnet(tuple(architecture["input_shape"]),
                             int(architecture["num_classes"]), seed=seed)
    if name == "mlp":
        return build_mlp(int(architecture["input_dim"]), list(architecture["hidden_dims"]),
                         int(architecture["num_classes"]), seed=seed,
                         input_shape=tuple(architecture["input_shape"]))
    raise ValueError(f"unknown architecture {name!r}")


def predict_proba(net: Network, x: InputLike) -> np.ndarray:
    """Probability rows for a batch, BN in inference mode, no taping."""
    with no_grad():
        return net.forward(x, training=False).data


def classify(net: Network, x: InputLike) -> np.ndarray:
    """Argmax class per row; ties resolve to the lowest index."""
    return np.argmax(predict_proba(net, x), axis=-1)
