"""
Optimizers - Building Block: SGD / Adam

Purpose:
    In-place parameter updates from gradient arrays. SGD with momentum and
    a single step decay drives training; Adam drives the tanh-space CW search.

Input Data:
    - params: list of Tensors
    - grads: list of arrays aligned with params (None entries are skipped)
"""

from typing import List, Optional, Sequence

import numpy as np

from ..core.tensor import Tensor


class SGD:
    """
    SGD with heavy-ball momentum: v = m*v + g; p -= lr*v.

    The learning rate is multiplied by ``decay`` once ``epoch`` reaches
    ``decay_epoch`` (set via ``set_epoch``).

    Example:
        >>> opt = SGD(net.parameters(), lr=0.05, momentum=0.9, decay_epoch=2)
        >>> opt.step([p.grad for p in net.parameters()])
    """

    def __init__(self, params: Sequence[Tensor], lr: float = 0.05, momentum: float = 0.9,
                 decay: float = 0.1, decay_epoch: Optional[int] = None):
        if lr <= 0:
            raise ValueError(f"learning rate must be positive, got {lr}")
        if not 0 <= momentum < 1:
            raise ValueError(f"momentum must be in [0, 1), got {momentum}")
        self.params = list(params)
        self.base_lr = lr
        self.lr = lr
        self.momentum = momentum
        self.decay = decay
        self.decay_epoch = decay_epoch
        self.velocity: List[np.ndarray] = [np.zeros_like(p.data) for p in self.params]

    def set_epoch(self, epoch: int) -> float:
        """Apply the step schedule for a 0-based ``epoch``; returns the lr in use."""
        decayed = self.decay_epoch is not None and epoch >= self.decay_epoch
        self.lr = self.base_lr * (self.decay if decayed else 1.0)
        return self.lr

    def step(self, grads: Sequence[Optional[np.ndarray]]) -> None:
        for i, (param, grad) in enumerate(zip(self.params, grads)):
            if grad is None:
                continue
            self.velocity[i] = self.momentum * self.velocity[i] + grad
            param.data = param.data - self.lr * self.velocity[i].astype(param.data.dtype, copy=False)


class Adam:
    """Adam with bias correction."""

    def __init__(self, params: Sequence[Tensor], lr: float = 0.01, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self, grads: Sequence[Optional[np.ndarray]]) -> None:
        self.t += 1
        for i, (param, grad) in enumerate(zip(self.params, grads)):
            if grad is None:
                continue
            self.m[i] = self.beta1 * self.m[i] + (1 - self.beta1) * grad
            self.v[i] = self.beta2 * self.v[i] + (1 - self.beta2) * grad * grad
            m_hat = self.m[i] / (1 - self.beta1 ** self.t)
            v_hat = self.v[i] / (1 - self.beta2 ** self.t)
            param.data = param.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
