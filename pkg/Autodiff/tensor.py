from __future__ import annotations

from abc import ABC, abstractmethod
from typing import TYPE_CHECKING

import numpy as np

from Common import ContractError, NumericalError, format_shape

from .tape import active_tape

if TYPE_CHECKING:
    from collections.abc import Sequence
    from typing import Any, ClassVar

    from .tape import OpKind, TapeNode

    ArrayLike = np.ndarray | float | int | Sequence

__all__ = ("Function", "Tensor", "as_tensor")


class Function(ABC):
    """A differentiable operation.

    `forward` receives the raw arrays of the inputs and may keep whatever it
    needs for `backward` on the instance. `backward` receives the gradient of
    the output and returns one gradient per input (None where the input is
    not differentiable).
    """

    kind: ClassVar[OpKind]

    def __init__(self, *tensors: Tensor):
        self.tensors = tensors

    @abstractmethod
    def forward(self, *arrays: np.ndarray, **kwargs: Any) -> np.ndarray:
        pass

    @abstractmethod
    def backward(self, grad: np.ndarray, /) -> tuple[np.ndarray | None, ...]:
        pass

    @classmethod
    def apply(cls, *tensors: Tensor, **kwargs: Any) -> Tensor:
        function = cls(*tensors)

        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            value = function.forward(*(tensor.data for tensor in tensors), **kwargs)

        if not np.all(np.isfinite(value)):
            raise NumericalError(f"{cls.kind} produced non-finite values.")

        tape = active_tape()
        recording = tape is not None and any(tensor.requires_grad for tensor in tensors)

        out = Tensor._wrap(value, recording)
        if recording:
            out.node = tape.record(function, tensors, value)

        return out

    @staticmethod
    def unbroadcast(grad: np.ndarray, shape: tuple[int, ...], /) -> np.ndarray:
        if grad.shape == shape:
            return grad

        # Sum out leading axes added by broadcasting
        while grad.ndim > len(shape):
            grad = grad.sum(axis=0)

        # Sum out axes that were stretched from extent 1
        for axis, extent in enumerate(shape):
            if extent == 1 and grad.shape[axis] != 1:
                grad = grad.sum(axis=axis, keepdims=True)

        return grad


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "node")

    def __init__(self, data: ArrayLike, /, *, requires_grad: bool = False):
        if getattr(data, "model_input_forbidden", False):
            raise ContractError("True simulator states must never enter a model input path.")

        self.data: np.ndarray = np.array(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.node: TapeNode | None = None

    @classmethod
    def _wrap(cls, value: np.ndarray, requires_grad: bool, /) -> Tensor:
        tensor = cls.__new__(cls)
        tensor.data = value
        tensor.requires_grad = requires_grad
        tensor.grad = None
        tensor.node = None
        return tensor

    def __repr__(self):
        return f"Tensor({format_shape(self.shape)}, requires_grad={self.requires_grad})"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def T(self) -> Tensor:
        return ops.transpose(self)

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a single value, got {format_shape(self.shape)}.")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def detach(self) -> Tensor:
        return Tensor._wrap(self.data, False)

    def __add__(self, other: Tensor | ArrayLike) -> Tensor:
        return ops.add(self, other)

    def __radd__(self, other: ArrayLike) -> Tensor:
        return ops.add(other, self)

    def __sub__(self, other: Tensor | ArrayLike) -> Tensor:
        return ops.sub(self, other)

    def __rsub__(self, other: ArrayLike) -> Tensor:
        return ops.sub(other, self)

    def __mul__(self, other: Tensor | ArrayLike) -> Tensor:
        return ops.mul(self, other)

    def __rmul__(self, other: ArrayLike) -> Tensor:
        return ops.mul(other, self)

    def __truediv__(self, other: Tensor | ArrayLike) -> Tensor:
        return ops.div(self, other)

    def __rtruediv__(self, other: ArrayLike) -> Tensor:
        return ops.div(other, self)

    def __neg__(self) -> Tensor:
        return ops.neg(self)

    def __pow__(self, exponent: float) -> Tensor:
        return ops.power(self, exponent)

    def __matmul__(self, other: Tensor) -> Tensor:
        return ops.matmul(self, other)

    def __getitem__(self, index: Any) -> Tensor:
        return ops.index(self, index)

    def sum(self, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:
        return ops.reduce_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:
        return ops.reduce_mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape: int) -> Tensor:
        return ops.reshape(self, shape)

    def exp(self) -> Tensor:
        return ops.exp(self)

    def log(self) -> Tensor:
        return ops.log(self)

    def sqrt(self) -> Tensor:
        return ops.sqrt(self)

    def square(self) -> Tensor:
        return ops.mul(self, self)


def as_tensor(value: Tensor | ArrayLike, /) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


# Circular: ops subclasses Function and builds Tensors
from . import ops  # noqa: E402  # isort: skip
