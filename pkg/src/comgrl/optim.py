"""Adaptive-moment (Adam) parameter updates for autodiff tensors."""

from __future__ import annotations

import warnings

import numpy as np

from .autodiff import Tensor


class Adam:
    """Standard Adam with bias correction.

    Parameters without a populated gradient are skipped with a warning.
    ``weight_decay`` adds classic L2 regularization (decay * value) to the
    gradient before the moment updates; the default of 0 disables it.
    """

    def __init__(
        self,
        params: list[Tensor],
        lr: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        weight_decay: float = 0.0,
    ):
        if lr <= 0:
            raise ValueError(f"learning rate must be positive, got {lr}")
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self.m = [np.zeros_like(p.values) for p in self.params]
        self.v = [np.zeros_like(p.values) for p in self.params]

    def step(self) -> None:
        self.step_count += 1
        t = self.step_count
        for i, p in enumerate(self.params):
            if p.grad is None:
                warnings.warn(f"Adam: parameter {i} has no gradient, skipped", RuntimeWarning)
                continue
            g = p.grad
            if self.weight_decay:
                g = g + self.weight_decay * p.values
            self.m[i] = self.beta1 * self.m[i] + (1 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1 - self.beta2) * (g * g)
            m_hat = self.m[i] / (1 - self.beta1**t)
            v_hat = self.v[i] / (1 - self.beta2**t)
            p.values -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()
