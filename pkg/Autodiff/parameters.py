from __future__ import annotations

from enum import StrEnum
from typing import TYPE_CHECKING

import numpy as np

from Common import ContractError, DimensionError

from .tensor import Tensor

if TYPE_CHECKING:
    from collections.abc import Iterator

__all__ = ("ParameterGroup", "Parameter", "ParameterStore")


class ParameterGroup(StrEnum):
    NN = "nn"
    GP = "gp"
    Buffer = "buffer"


class Parameter:
    __slots__ = ("name", "value", "group")

    def __init__(self, name: str, value: Tensor, group: ParameterGroup, /):
        self.name = name
        self.value = value
        self.group = group

    def __repr__(self):
        return f"Parameter({self.name!r}, {self.value!r}, group={self.group})"

    @property
    def requires_grad(self) -> bool:
        return self.value.requires_grad

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape


class ParameterStore:
    """Flat, ordered registry of every tensor a model owns, keyed by path name."""

    def __init__(self):
        self._parameters: dict[str, Parameter] = {}

    def __len__(self) -> int:
        return len(self._parameters)

    def __iter__(self) -> Iterator[Parameter]:
        return iter(self._parameters.values())

    def __contains__(self, name: str) -> bool:
        return name in self._parameters

    def __getitem__(self, name: str) -> Parameter:
        return self._parameters[name]

    def names(self) -> tuple[str, ...]:
        return tuple(self._parameters)

    def add(self, name: str, data: np.ndarray, group: ParameterGroup, /) -> Tensor:
        if name in self._parameters:
            raise ContractError(f"Duplicate parameter name {name!r}.")

        tensor = Tensor(data, requires_grad=group is not ParameterGroup.Buffer)
        self._parameters[name] = Parameter(name, tensor, group)
        return tensor

    def trainable(self) -> Iterator[Parameter]:
        return (parameter for parameter in self if parameter.requires_grad)

    def group(self, group: ParameterGroup, /) -> Iterator[Parameter]:
        return (parameter for parameter in self if parameter.group is group)

    def zero_grad(self) -> None:
        for parameter in self:
            parameter.value.grad = None

    def state(self) -> dict[str, np.ndarray]:
        return {name: param.value.data.copy() for name, param in self._parameters.items()}

    def load_state(self, state: dict[str, np.ndarray], /) -> None:
        missing = set(self._parameters) ^ set(state)
        if missing:
            raise ContractError(f"Parameter names differ: {', '.join(sorted(missing))}.")

        for name, data in state.items():
            target = self._parameters[name].value
            if target.shape != data.shape:
                raise DimensionError(f"load {name}", target.shape, data.shape)
            target.data[...] = data
