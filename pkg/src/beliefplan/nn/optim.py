"""Adaptive-moment optimizer with decoupled weight decay and schedule hooks."""

from __future__ import annotations

import numpy as np

from ..errors import NonFiniteGradientError
from .layers import ParameterStore


class AdamW:
    """Bias-corrected adaptive steps; weight decay applied to the parameter
    directly rather than through the gradient.  With ``weight_decay=0`` this
    is plain Adam."""

    def __init__(
        self,
        store: ParameterStore,
        lr: float = 1e-3,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        weight_decay: float = 0.0,
    ):
        self.store = store
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self._m = {name: np.zeros_like(t.data) for name, t in store.items()}
        self._v = {name: np.zeros_like(t.data) for name, t in store.items()}

    def step(self) -> None:
        """Apply one update from the accumulated gradients.

        Rejects the whole step (no parameter is touched) if any gradient
        contains a non-finite entry, naming the offending parameter.
        """
        grads = {}
        for name, t in self.store.items():
            g = t.grad
            if g is None:
                g = np.zeros_like(t.data)
            if not np.all(np.isfinite(g)):
                raise NonFiniteGradientError(name)
            grads[name] = g
        self.step_count += 1
        t_step = self.step_count
        bc1 = 1.0 - self.beta1 ** t_step
        bc2 = 1.0 - self.beta2 ** t_step
        for name, param in self.store.items():
            g = grads[name]
            m = self._m[name]
            v = self._v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            m_hat = m / bc1
            v_hat = v / bc2
            param.data -= self.lr * (m_hat / (np.sqrt(v_hat) + self.eps) + self.weight_decay * param.data)

    def zero_grad(self) -> None:
        self.store.zero_grad()


def halved_every(base_lr: float, period_epochs: int):
    """Learning rate halved after every ``period_epochs`` epochs."""

    def schedule(epoch: int) -> float:
        return base_lr * 0.5 ** (epoch // period_epochs)

    return schedule


def decayed_every(base_lr: float, factor: float, period_steps: int):
    """Learning rate multiplied by ``factor`` after every ``period_steps`` steps."""

    def schedule(step: int) -> float:
        return base_lr * factor ** (step // period_steps)

    return schedule
