"""
Differentiable Primitives - Building Block: Primitive registry

Purpose:
    The forward and backward rules of every operation the models and losses
    are built from. Rules work on raw numpy arrays; taping is handled by
    core.tensor.apply_primitive.

Input Data:
    - numpy arrays (one per Tensor input)
    - op attributes as keyword arguments

Output Data:
    - forward: output array (intermediate values stored in the ``saved`` dict)
    - backward: one gradient array per input, ``None`` where not requested

References:
    - core/tensor.py: TapeNode and reverse pass
"""

from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import DomainError, ShapeError

Saved = Dict[str, Any]
Grads = Tuple[Optional[np.ndarray], ...]


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(*shapes: Tuple[int, ...]) -> Tuple[int, ...]:
    try:
        return np.broadcast_shapes(*shapes)
    except ValueError as exc:
        raise ShapeError(f"Cannot broadcast shapes {shapes}") from exc


def _check_domain(kind: str, a: np.ndarray, clamp: Optional[float]) -> np.ndarray:
    if clamp is None:
        if np.any(a <= 0):
            raise DomainError(
                f"{kind} of non-positive input (min={float(a.min())}); "
                "use the clamped variant"
            )
        return a
    return np.maximum(a, clamp)


class Primitive:
    """Base class: subclasses implement ``forward`` and ``backward``."""

    kind = "primitive"

    @staticmethod
    def forward(saved: Saved, *inputs: np.ndarray, **attrs: Any) -> np.ndarray:
        raise NotImplementedError

    @staticmethod
    def backward(saved: Saved, grad: np.ndarray, needs: Sequence[bool]) -> Grads:
        raise NotImplementedError


# Elementwise arithmetic
class Add(Primitive):
    kind = "add"

    @staticmethod
    def forward(saved, a, b):
        _broadcast_shape(a.shape, b.shape)
        saved["shapes"] = (a.shape, b.shape)
        return a + b

    @staticmethod
    def backward(saved, grad, needs):
        sa, sb = saved["shapes"]
        return (
            unbroadcast(grad, sa) if needs[0] else None,
            unbroadcast(grad, sb) if needs[1] else None,
        )


class Multiply(Primitive):
    kind = "multiply"

    @staticmethod
    def forward(saved, a, b):
        _broadcast_shape(a.shape, b.shape)
        saved["a"], saved["b"] = a, b
        return a * b

    @staticmethod
    def backward(saved, grad, needs):
        a, b = saved["a"], saved["b"]
        return (
            unbroadcast(grad * b, a.shape) if needs[0] else None,
            unbroadcast(grad * a, b.shape) if needs[1] else None,
        )


class Negate(Primitive):
    kind = "negate"

    @staticmethod
    def forward(saved, a):
        return -a

    @staticmethod
    def backward(saved, grad, needs):
        return (-grad,)


class Reciprocal(Primitive):
    """1/x; with ``clamp`` the input is floored at ``clamp`` first."""

    kind = "reciprocal"

    @staticmethod
    def forward(saved, a, clamp=None):
        ac = _check_domain("reciprocal", a, clamp)
        saved["ac"] = ac
        saved["active"] = a >= clamp if clamp is not None else None
        return 1.0 / ac

    @staticmethod
    def backward(saved, grad, needs):
        ac = saved["ac"]
        g = -grad / (ac * ac)
        if saved["active"] is not None:
            g = g * saved["active"]
        return (g,)


class Log(Primitive):
    """Natural log; with ``clamp`` the input is floored at ``clamp`` first."""

    kind = "log"

    @staticmethod
    def forward(saved, a, clamp=None):
        ac = _check_domain("log", a, clamp)
        saved["ac"] = ac
        saved["active"] = a >= clamp if clamp is not None else None
        return np.log(ac)

    @staticmethod
    def backward(saved, grad, needs):
        g = grad / saved["ac"]
        if saved["active"] is not None:
            g = g * saved["active"]
        return (g,)


class Exp(Primitive):
    kind = "exp"

    @staticmethod
    def forward(saved, a):
        out = np.exp(a)
        saved["out"] = out
        return out

    @staticmethod
    def backward(saved, grad, needs):
        return (grad * saved["out"],)


class Tanh(Primitive):
    kind = "tanh"

    @staticmethod
    def forward(saved, a):
        out = np.tanh(a)
        saved["out"] = out
        return out

    @staticmethod
    def backward(saved, grad, needs):
        out = saved["out"]
        return (grad * (1.0 - out * out),)


class Relu(Primitive):
    kind = "relu"

    @staticmethod
    def forward(saved, a):
        mask = a > 0
        saved["mask"] = mask
        return np.where(mask, a, 0.0)

    @staticmethod
    def backward(saved, grad, needs):
        return (grad * saved["mask"],)


# Linear algebra
class Matmul(Primitive):
    kind = "matmul"

    @staticmethod
    def forward(saved, a, b):
        if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
            raise ShapeError(f"matmul expects (n,k)@(k,m), got {a.shape}@{b.shape}")
        saved["a"], saved["b"] = a, b
        return a @ b

    @staticmethod
    def backward(saved, grad, needs):
        a, b = saved["a"], saved["b"]
        return (
            grad @ b.T if needs[0] else None,
            a.T @ grad if needs[1] else None,
        )


class Conv2d(Primitive):
    """Cross-correlation of (N,C,H,W) input with (O,C,kh,kw) filters plus bias."""

    kind = "conv2d"

    @staticmethod
    def forward(saved, x, w, b, stride=1, padding=0):
        if x.ndim != 4 or w.ndim != 4 or x.shape[1] != w.shape[1]:
            raise ShapeError(f"conv2d shape mismatch: input {x.shape}, weight {w.shape}")
        if b.shape != (w.shape[0],):
            raise ShapeError(f"conv2d bias shape {b.shape} != ({w.shape[0]},)")
        kh, kw = w.shape[2], w.shape[3]
        xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
        if xp.shape[2] < kh or xp.shape[3] < kw:
            raise ShapeError(f"conv2d kernel {w.shape[2:]} larger than padded input")
        windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
        out = np.tensordot(windows, w, axes=([1, 4, 5], [1, 2, 3]))
        saved.update(windows=windows, w=w, x_shape=x.shape, stride=stride, padding=padding)
        return out.transpose(0, 3, 1, 2) + b[None, :, None, None]

    @staticmethod
    def backward(saved, grad, needs):
        windows, w = saved["windows"], saved["w"]
        stride, padding = saved["stride"], saved["padding"]
        n, c, h, wd = saved["x_shape"]
        kh, kw = w.shape[2], w.shape[3]
        ho, wo = grad.shape[2], grad.shape[3]

        gx = None
        if needs[0]:
            gxp = np.zeros((n, c, h + 2 * padding, wd + 2 * padding), dtype=grad.dtype)
            for i in range(kh):
                for j in range(kw):
                    contrib = np.tensordot(grad, w[:, :, i, j], axes=([1], [0]))
                    gxp[:, :, i:i + stride * (ho - 1) + 1:stride,
                        j:j + stride * (wo - 1) + 1:stride] += contrib.transpose(0, 3, 1, 2)
            gx = gxp[:, :, padding:padding + h, padding:padding + wd]
        gw = np.tensordot(grad, windows, axes=([0, 2, 3], [0, 2, 3])) if needs[1] else None
        gb = grad.sum(axis=(0, 2, 3)) if needs[2] else None
        return gx, gw, gb


class BatchNorm(Primitive):
    """
    Batch normalization over the channel axis 1 of (N,C) or (N,C,H,W) input.

    ``training=True`` normalizes with batch statistics and updates the
    running arrays in place; ``training=False`` uses the running statistics.
    """

    kind = "batch_norm"

    @staticmethod
    def forward(saved, x, gamma, beta, running_mean=None, running_var=None,
                training=False, momentum=0.1, eps=1e-5):
        if x.ndim not in (2, 4) or gamma.shape != (x.shape[1],) or beta.shape != gamma.shape:
            raise ShapeError(f"batch_norm shape mismatch: input {x.shape}, gamma {gamma.shape}")
        axes = (0,) if x.ndim == 2 else (0, 2, 3)
        bshape = (1, x.shape[1]) + (1,) * (x.ndim - 2)
        if training:
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            count = x.size // x.shape[1]
            if running_mean is not None:
                unbiased = var * count / max(count - 1, 1)
                running_mean *= 1.0 - momentum
                running_mean += momentum * mean
                running_var *= 1.0 - momentum
                running_var += momentum * unbiased
        else:
            mean, var = running_mean, running_var
        inv_std = 1.0 / np.sqrt(var + eps)
        xhat = (x - mean.reshape(bshape)) * inv_std.reshape(bshape)
        saved.update(xhat=xhat, inv_std=inv_std, gamma=gamma, axes=axes,
                     bshape=bshape, training=training)
        return gamma.reshape(bshape) * xhat + beta.reshape(bshape)

    @staticmethod
    def backward(saved, grad, needs):
        xhat, inv_std, gamma = saved["xhat"], saved["inv_std"], saved["gamma"]
        axes, bshape = saved["axes"], saved["bshape"]
        gx = None
        if needs[0]:
            dxhat = grad * gamma.reshape(bshape)
            if saved["training"]:
                m = grad.size // grad.shape[1]
                gx = (inv_std.reshape(bshape) / m) * (
                    m * dxhat
                    - dxhat.sum(axis=axes).reshape(bshape)
                    - xhat * (dxhat * xhat).sum(axis=axes).reshape(bshape)
                )
            else:
                gx = dxhat * inv_std.reshape(bshape)
        ggamma = (grad * xhat).sum(axis=axes) if needs[1] else None
        gbeta = grad.sum(axis=axes) if needs[2] else None
        return gx, ggamma, gbeta


class MaxPool2d(Primitive):
    """Non-overlapping max pooling with window == stride == ``size``."""

    kind = "maxpool2d"

    @staticmethod
    def forward(saved, x, size=2):
        if x.ndim != 4 or x.shape[2] % size or x.shape[3] % size:
            raise ShapeError(f"maxpool2d needs (N,C,H,W) divisible by {size}, got {x.shape}")
        n, c, h, w = x.shape
        blocks = (
            x.reshape(n, c, h // size, size, w // size, size)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(n, c, h // size, w // size, size * size)
        )
        arg = blocks.argmax(axis=-1)
        saved.update(arg=arg, x_shape=x.shape, size=size)
        return np.take_along_axis(blocks, arg[..., None], axis=-1)[..., 0]

    @staticmethod
    def backward(saved, grad, needs):
        arg, size = saved["arg"], saved["size"]
        n, c, h, w = saved["x_shape"]
        blocks = np.zeros(grad.shape + (size * size,), dtype=grad.dtype)
        np.put_along_axis(blocks, arg[..., None], grad[..., None], axis=-1)
        gx = (
            blocks.reshape(n, c, h // size, w // size, size, size)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(n, c, h, w)
        )
        return (gx,)


# Reductions
def _expand_reduced(grad: np.ndarray, shape, axis, keepdims) -> np.ndarray:
    if axis is not None and not keepdims:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        axes = tuple(a % len(shape) for a in axes)
        grad = np.expand_dims(grad, axes)
    return np.broadcast_to(grad, shape)


class Sum(Primitive):
    kind = "sum"

    @staticmethod
    def forward(saved, a, axis=None, keepdims=False):
        saved.update(shape=a.shape, axis=axis, keepdims=keepdims)
        return np.asarray(a.sum(axis=axis, keepdims=keepdims))

    @staticmethod
    def backward(saved, grad, needs):
        g = _expand_reduced(grad, saved["shape"], saved["axis"], saved["keepdims"])
        return (np.array(g, copy=True),)


class Mean(Primitive):
    kind = "mean"

    @staticmethod
    def forward(saved, a, axis=None, keepdims=False):
        out = np.asarray(a.mean(axis=axis, keepdims=keepdims))
        saved.update(shape=a.shape, axis=axis, keepdims=keepdims,
                     count=a.size // max(out.size, 1))
        return out

    @staticmethod
    def backward(saved, grad, needs):
        g = _expand_reduced(grad, saved["shape"], saved["axis"], saved["keepdims"])
        return (g / saved["count"],)


class MaxReduce(Primitive):
    """Max over one axis (or all); the gradient flows to the first maximizer."""

    kind = "max"

    @staticmethod
    def forward(saved, a, axis=None, keepdims=False):
        if axis is None:
            flat = a.reshape(-1)
            idx = int(flat.argmax())
            saved.update(shape=a.shape, axis=None, idx=idx)
            out = flat[idx]
            return np.asarray(out).reshape((1,) * a.ndim if keepdims else ())
        axis = axis % a.ndim
        arg = a.argmax(axis=axis)
        saved.update(shape=a.shape, axis=axis, arg=arg)
        out = np.take_along_axis(a, np.expand_dims(arg, axis), axis=axis)
        return out if keepdims else np.squeeze(out, axis=axis)

    @staticmethod
    def backward(saved, grad, needs):
        shape = saved["shape"]
        g = np.zeros(shape, dtype=grad.dtype)
        if saved["axis"] is None:
            g.reshape(-1)[saved["idx"]] = np.asarray(grad).reshape(-1)[0]
            return (g,)
        axis = saved["axis"]
        gv = grad.reshape(saved["arg"].shape)
        np.put_along_axis(g, np.expand_dims(saved["arg"], axis),
                          np.expand_dims(gv, axis), axis=axis)
        return (g,)


class Softmax(Primitive):
    """Softmax over the last axis, computed with max-shifted exponentials."""

    kind = "softmax"

    @staticmethod
    def forward(saved, a):
        shifted = a - a.max(axis=-1, keepdims=True)
        e = np.exp(shifted)
        out = e / e.sum(axis=-1, keepdims=True)
        saved["out"] = out
        return out

    @staticmethod
    def backward(saved, grad, needs):
        s = saved["out"]
        return (s * (grad - (grad * s).sum(axis=-1, keepdims=True)),)


# Shape manipulation
class Reshape(Primitive):
    kind = "reshape"

    @staticmethod
    def forward(saved, a, shape=None):
        saved["shape"] = a.shape
        try:
            return a.reshape(shape)
        except ValueError as exc:
            raise ShapeError(f"cannot reshape {a.shape} to {shape}") from exc

    @staticmethod
    def backward(saved, grad, needs):
        return (grad.reshape(saved["shape"]),)


class Slice(Primitive):
    kind = "slice"

    @staticmethod
    def forward(saved, a, index=None):
        saved.update(shape=a.shape, index=index)
        try:
            return np.array(a[index], copy=True)
        except IndexError as exc:
            raise ShapeError(f"index {index!r} invalid for shape {a.shape}") from exc

    @staticmethod
    def backward(saved, grad, needs):
        g = np.zeros(saved["shape"], dtype=grad.dtype)
        np.add.at(g, saved["index"], grad)
        return (g,)


PRIMITIVES: Dict[str, type] = {
    cls.kind: cls
    for cls in (
        Add, Multiply, Negate, Reciprocal, Log, Exp, Tanh, Relu, Matmul, Conv2d,
        BatchNorm, MaxPool2d, Sum, Mean, MaxReduce, Softmax, Reshape, Slice,
    )
}
