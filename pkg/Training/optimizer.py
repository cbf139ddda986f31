from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from Autodiff import ParameterGroup
from Common import ConfigurationError

if TYPE_CHECKING:
    from Autodiff import GradientStore, ParameterStore

__all__ = ("OptimizerState", "AdamW")


@dataclass(kw_only=True)
class OptimizerState:
    step: int = 0
    first: dict[str, np.ndarray] = field(default_factory=dict)
    second: dict[str, np.ndarray] = field(default_factory=dict)


class AdamW:
    """Adaptive moment estimation with decoupled weight decay.

    Two groups: NN weights at `lr_nn` (with decay) and GP parameters at `lr_gp`
    (never decayed). A group with a zero learning rate is left untouched.
    """

    def __init__(
        self,
        store: ParameterStore,
        /,
        *,
        lr_nn: float,
        lr_gp: float,
        weight_decay: float = 0.0,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
    ):
        if min(lr_nn, lr_gp, weight_decay) < 0 or not all(0 <= beta < 1 for beta in betas):
            raise ConfigurationError("Optimizer rates, decay and betas must be non-negative.")

        self.store = store
        self.rates = {ParameterGroup.NN: lr_nn, ParameterGroup.GP: lr_gp}
        self.decay = {ParameterGroup.NN: weight_decay, ParameterGroup.GP: 0.0}
        self.betas = betas
        self.eps = eps
        self.state = OptimizerState()

    def step(self, grads: GradientStore, /) -> None:
        self.state.step += 1
        beta1, beta2 = self.betas
        correction1 = 1.0 - beta1**self.state.step
        correction2 = 1.0 - beta2**self.state.step

        for parameter in self.store.trainable():
            lr = self.rates[parameter.group]
            if lr == 0:
                continue

            name, tensor = parameter.name, parameter.value
            grad = grads[tensor]

            first = self.state.first.setdefault(name, np.zeros_like(tensor.data))
            second = self.state.second.setdefault(name, np.zeros_like(tensor.data))
            first *= beta1
            first += (1.0 - beta1) * grad
            second *= beta2
            second += (1.0 - beta2) * grad * grad

            decay = self.decay[parameter.group]
            if decay:
                tensor.data *= 1.0 - lr * decay

            step = (first / correction1) / (np.sqrt(second / correction2) + self.eps)
            tensor.data -= lr * step
