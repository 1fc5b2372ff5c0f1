"""
Tensor Engine - Building Block: Tensor / TapeNode

Purpose:
    Minimal reverse-mode automatic differentiation over dense numpy arrays.
    Every primitive application on an input that requires gradients records a
    TapeNode; ``backward`` replays the tape in reverse creation order.

Input Data:
    - array-like data, ``requires_grad`` flag
    - primitive kind + attributes (see core/primitives.py)

Output Data:
    - forward values as Tensors
    - gradient maps {leaf Tensor: ndarray}

Setup/Configuration:
    - set_default_dtype(): float64 (verification, default) or float32 (bulk training)
    - no_grad(): thread-local switch that disables taping

Concurrency:
    A tape and its tensors belong to one thread. The grad-mode flag is
    thread-local; the default dtype is process-wide and is only switched by
    the trainer.
"""

import itertools
import threading
from contextlib import contextmanager
from typing import Any, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import FimGuardError, ShapeError
from .primitives import PRIMITIVES

ArrayLike = Union["Tensor", np.ndarray, float, int, Sequence[Any]]

_SUPPORTED_DTYPES = (np.float64, np.float32)
_default_dtype: type = np.float64
_grad_state = threading.local()
_sequence = itertools.count()


def set_default_dtype(dtype: Any) -> None:
    """Set the float type used when Tensors are created from non-float data."""
    global _default_dtype
    resolved = np.dtype(dtype).type
    if resolved not in _SUPPORTED_DTYPES:
        raise ValueError(f"Unsupported dtype {dtype}; use float64 or float32")
    _default_dtype = resolved


def get_default_dtype() -> type:
    return _default_dtype


def is_grad_enabled() -> bool:
    return getattr(_grad_state, "enabled", True)


@contextmanager
def no_grad() -> Iterator[None]:
    """Evaluate without recording tape nodes (current thread only)."""
    previous = is_grad_enabled()
    _grad_state.enabled = False
    try:
        yield
    finally:
        _grad_state.enabled = previous


class TapeNode:
    """
    One recorded primitive application.

    ``seq`` is a process-wide creation counter, so sorting nodes by it
    yields a topological order of the tape.
    """

    __slots__ = ("kind", "inputs", "saved", "seq", "primitive")

    def __init__(self, kind: str, inputs: Tuple["Tensor", ...], saved: Dict[str, Any],
                 primitive: type):
        self.kind = kind
        self.inputs = inputs
        self.saved: Optional[Dict[str, Any]] = saved
        self.seq = next(_sequence)
        self.primitive = primitive

    def __repr__(self) -> str:
        return f"TapeNode(kind={self.kind}, seq={self.seq}, inputs={len(self.inputs)})"


class Tensor:
    """
    n-dimensional real array with optional tape participation.

    Example:
        >>> x = Tensor([3.0], requires_grad=True)
        >>> y = (x * x).sum()
        >>> backward(y)[x]
        array([6.])
    """

    __array_priority__ = 1000

    def __init__(self, data: ArrayLike, requires_grad: bool = False, dtype: Any = None):
        if isinstance(data, Tensor):
            data = data.data
        array = np.asarray(data)
        if dtype is not None:
            array = array.astype(dtype, copy=False)
        elif array.dtype.kind != "f":
            array = array.astype(_default_dtype)
        self.data: np.ndarray = array
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self._node: Optional[TapeNode] = None

    # Introspection
    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return self._node is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single element, shape is {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"

    # Operators
    def __add__(self, other: ArrayLike) -> "Tensor":
        return apply_primitive("add", (self, other))

    def __radd__(self, other: ArrayLike) -> "Tensor":
        return apply_primitive("add", (other, self))

    def __sub__(self, other: ArrayLike) -> "Tensor":
        return apply_primitive("add", (self, -as_tensor(other)))

    def __rsub__(self, other: ArrayLike) -> "Tensor":
        return apply_primitive("add", (other, -self))

    def __mul__(self, other: ArrayLike) -> "Tensor":
        return apply_primitive("multiply", (self, other))

    def __rmul__(self, other: ArrayLike) -> "Tensor":
        return apply_primitive("multiply", (other, self))

    def __truediv__(self, other: ArrayLike) -> "Tensor":
        return self * apply_primitive("reciprocal", (other,))

    def __rtruediv__(self, other: ArrayLike) -> "Tensor":
        return as_tensor(other) * apply_primitive("reciprocal", (self,))

    def __neg__(self) -> "Tensor":
        return apply_primitive("negate", (self,))

    def __matmul__(self, other: ArrayLike) -> "Tensor":
        return apply_primitive("matmul", (self, other))

    def __getitem__(self, index: Any) -> "Tensor":
        return apply_primitive("slice", (self,), index=index)

    # Method forms of the common primitives
    def sum(self, axis: Any = None, keepdims: bool = False) -> "Tensor":
        return apply_primitive("sum", (self,), axis=axis, keepdims=keepdims)

    def mean(self, axis: Any = None, keepdims: bool = False) -> "Tensor":
        return apply_primitive("mean", (self,), axis=axis, keepdims=keepdims)

    def max(self, axis: Optional[int] = None, keepdims: bool = False) -> "Tensor":
        return apply_primitive("max", (self,), axis=axis, keepdims=keepdims)

    def reshape(self, *shape: Any) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return apply_primitive("reshape", (self,), shape=shape)

    def relu(self) -> "Tensor":
        return apply_primitive("relu", (self,))

    def exp(self) -> "Tensor":
        return apply_primitive("exp", (self,))

    def log(self, clamp: Optional[float] = None) -> "Tensor":
        return apply_primitive("log", (self,), clamp=clamp)

    def reciprocal(self, clamp: Optional[float] = None) -> "Tensor":
        return apply_primitive("reciprocal", (self,), clamp=clamp)

    def tanh(self) -> "Tensor":
        return apply_primitive("tanh", (self,))

    def softmax(self) -> "Tensor":
        return apply_primitive("softmax", (self,))


def as_tensor(value: ArrayLike) -> Tensor:
    """Wrap constants as non-differentiable Tensors; pass Tensors through."""
    return value if isinstance(value, Tensor) else Tensor(value)


def apply_primitive(kind: str, inputs: Sequence[ArrayLike], **attrs: Any) -> Tensor:
    """
    Run the forward rule of primitive ``kind`` and record it on the tape.

    A TapeNode is recorded only when grad mode is enabled and at least one
    input requires gradients.

    Raises:
        ValueError: unknown primitive kind
        ShapeError: input shapes invalid for the op
        DomainError: log/reciprocal of non-positive values without a clamp
    """
    primitive = PRIMITIVES.get(kind)
    if primitive is None:
        raise ValueError(f"Unknown primitive {kind!r}; valid: {sorted(PRIMITIVES)}")
    tensors = tuple(as_tensor(t) for t in inputs)
    saved: Dict[str, Any] = {}
    data = primitive.forward(saved, *(t.data for t in tensors), **attrs)
    record = is_grad_enabled() and any(t.requires_grad for t in tensors)
    out = Tensor(data, requires_grad=record, dtype=np.asarray(data).dtype)
    if record:
        out._node = TapeNode(kind, tensors, saved, primitive)
    return out


def _collect_graph(output: Tensor) -> List[Tensor]:
    """All tensors reachable from ``output`` through recorded nodes, newest first."""
    seen: Dict[int, Tensor] = {}
    stack = [output]
    while stack:
        t = stack.pop()
        if id(t) in seen:
            continue
        seen[id(t)] = t
        if t._node is not None:
            stack.extend(t._node.inputs)
    interior = [t for t in seen.values() if t._node is not None]
    interior.sort(key=lambda t: t._node.seq, reverse=True)
    return interior


def _relevance(interior: List[Tensor], targets: Optional[Iterable[Tensor]]) -> Optional[Dict[int, bool]]:
    """Mark tensors whose value depends on one of ``targets`` (None: all)."""
    if targets is None:
        return None
    relevant: Dict[int, bool] = {id(t): True for t in targets}
    # oldest first so inputs are decided before their consumers
    for t in reversed(interior):
        relevant[id(t)] = any(relevant.get(id(i), False) for i in t._node.inputs)
    return relevant


def backward(output: Tensor, inputs: Optional[Sequence[Tensor]] = None,
             retain_graph: bool = False, accumulate: bool = True) -> Dict[Tensor, np.ndarray]:
    """
    Reverse pass from a scalar ``output``.

    Args:
        output: scalar Tensor (one element)
        inputs: restrict propagation to these leaves (default: every leaf
            that requires gradients)
        retain_graph: keep saved values so the tape can be replayed again
        accumulate: also add the gradients into each leaf's ``.grad``

    Returns:
        dict mapping each reached leaf to d(output)/d(leaf)

    Raises:
        ShapeError: output is not a scalar
        FimGuardError: the tape was already consumed
    """
    if output.size != 1:
        raise ShapeError(f"backward() needs a scalar output, got shape {output.shape}")

    seed = np.ones_like(output.data)
    if output._node is None:
        result = {output: seed} if output.requires_grad else {}
        if accumulate and output.requires_grad:
            output.grad = seed if output.grad is None else output.grad + seed
        return result

    interior = _collect_graph(output)
    relevant = _relevance(interior, inputs)
    wanted = None if inputs is None else {id(t) for t in inputs}

    grads: Dict[int, np.ndarray] = {id(output): seed}
    leaves: Dict[int, Tensor] = {}
    for t in interior:
        node = t._node
        grad = grads.pop(id(t), None)
        if grad is None:
            continue
        if node.saved is None:
            raise FimGuardError("Tape already consumed; pass retain_graph=True to replay it")
        needs = tuple(
            i.requires_grad and (relevant is None or relevant.get(id(i), False))
            for i in node.inputs
        )
        if any(needs):
            input_grads = node.primitive.backward(node.saved, grad, needs)
            for inp, g, need in zip(node.inputs, input_grads, needs):
                if not need or g is None:
                    continue
                key = id(inp)
                grads[key] = grads[key] + g if key in grads else g
                if inp._node is None:
                    leaves[key] = inp
        if not retain_graph:
            node.saved = None

    result: Dict[Tensor, np.ndarray] = {}
    for key, leaf in leaves.items():
        if wanted is not None and key not in wanted:
            continue
        g = np.asarray(grads[key]).reshape(leaf.shape)
        result[leaf] = g
        if accumulate:
            leaf.grad = g.copy() if leaf.grad is None else leaf.grad + g
    return result
