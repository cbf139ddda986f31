from __future__ import annotations

from math import sqrt
from typing import TYPE_CHECKING

import numpy as np

from Autodiff import ParameterGroup

if TYPE_CHECKING:
    from typing import Self

    from Autodiff import ParameterStore, Tensor

__all__ = ("Module", "uniform_fan_in")


def uniform_fan_in(
    rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, /
) -> np.ndarray:
    bound = 1.0 / sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Module:
    """A block of a network whose tensors live in a shared `ParameterStore`.

    Parameters are registered under dotted path names (`encoder.conv1.weight`),
    which is what checkpoints are keyed by.
    """

    def __init__(self, store: ParameterStore, prefix: str, /):
        self.store = store
        self.prefix = prefix
        self.training = True
        self.children: list[Module] = []

    def __repr__(self):
        return f"{type(self).__name__}({self.prefix!r})"

    def parameter(
        self, name: str, data: np.ndarray, group: ParameterGroup = ParameterGroup.NN, /
    ) -> Tensor:
        return self.store.add(f"{self.prefix}.{name}", data, group)

    def adopt(self, module: Module, /) -> Module:
        self.children.append(module)
        return module

    def train(self, mode: bool = True, /) -> Self:
        self.training = mode
        for child in self.children:
            child.train(mode)
        return self

    def eval(self) -> Self:
        return self.train(False)
