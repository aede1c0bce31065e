"""SGD com momento e taxa de aprendizado em cosseno (cosine annealing)."""

import math
from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from bearing_pga.core.exceptions import ShapeMismatchError


def cosine_lr(epoch: int, total_epochs: int, base_lr: float) -> float:
    """lr = 0.5·base_lr·(1 + cos(π·epoch/total_epochs))."""
    if total_epochs < 1:
        raise ValueError("total_epochs deve ser >= 1.")
    return 0.5 * base_lr * (1.0 + math.cos(math.pi * epoch / total_epochs))


@dataclass
class SgdState:
    base_lr: float
    total_epochs: int
    momentum: float = 0.9
    epoch: int = 0
    velocity: Dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def lr(self) -> float:
        return cosine_lr(self.epoch, self.total_epochs, self.base_lr)

    def next_epoch(self) -> None:
        self.epoch += 1


def sgd_step(params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray], state: SgdState) -> Dict[str, np.ndarray]:
    """
    Um passo de SGD com momento, in-place sobre `params`:
    v <- μ·v + g ; p <- p - lr·v.

    Raises:
        ShapeMismatchError: gradiente ausente ou com shape diferente do parâmetro.
    """
    lr = state.lr
    for name, param in params.items():
        if name not in grads:
            raise ShapeMismatchError(f"sgd_step: gradiente ausente para '{name}'.")
        grad = grads[name]
        if grad.shape != param.shape:
            raise ShapeMismatchError(f"sgd_step: '{name}' com gradiente {grad.shape} e parâmetro {param.shape}.")
        velocity = state.velocity.get(name)
        if velocity is None:
            velocity = np.zeros_like(param)
        velocity = state.momentum * velocity + grad
        state.velocity[name] = velocity
        param -= lr * velocity
    return params
