"""Adaptive-moment parameter updates."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .layers import Parameter


def adam_step(params: Sequence[Parameter], t: int, lr: float = 1e-3,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
    """Apply one bias-corrected adaptive-moment update in place.

    ``t`` is the 1-based step count shared by every parameter; moments
    persist on the parameters across steps.
    """
    if t < 1:
        raise ValueError("step count t starts at 1")
    for p in params:
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        p.m = beta1 * p.m + (1 - beta1) * g
        p.v = beta2 * p.v + (1 - beta2) * (g * g)
        m_hat = p.m / (1 - beta1 ** t)
        v_hat = p.v / (1 - beta2 ** t)
        p.data -= lr * m_hat / (np.sqrt(v_hat) + eps)


class Adam:
    """Stateful wrapper that counts steps for :func:`adam_step`."""

    def __init__(self, params: Sequence[Parameter], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        self.t += 1
        adam_step(self.params, self.t, self.lr, self.beta1, self.beta2, self.eps)
