from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np

from Common import DimensionError

from .tape import OpKind
from .tensor import Function, Tensor, as_tensor

if TYPE_CHECKING:
    from collections.abc import Sequence
    from typing import Any

    from .tensor import ArrayLike

    Axis = int | tuple[int, ...] | None

__all__ = (
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "power",
    "exp",
    "log",
    "sqrt",
    "matmul",
    "reduce_sum",
    "reduce_mean",
    "reshape",
    "transpose",
    "index",
    "concat",
    "clamp_min",
    "diagonal",
    "elu",
)


def _normalise_axes(axis: Axis, ndim: int, /) -> tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(sorted(a % ndim for a in axis))


class _Binary(Function):
    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        self.shapes = a.shape, b.shape
        try:
            return self.compute(a, b)
        except ValueError as error:
            raise DimensionError(self.kind, a.shape, b.shape) from error

    def compute(self, a: np.ndarray, b: np.ndarray, /) -> np.ndarray:
        raise NotImplementedError

    def reduce(
        self, grad_a: np.ndarray, grad_b: np.ndarray, /
    ) -> tuple[np.ndarray, np.ndarray]:
        shape_a, shape_b = self.shapes
        return self.unbroadcast(grad_a, shape_a), self.unbroadcast(grad_b, shape_b)


class Add(_Binary):
    kind = OpKind.Add

    def compute(self, a, b, /):
        return a + b

    def backward(self, grad, /):
        return self.reduce(grad, grad)


class Sub(_Binary):
    kind = OpKind.Sub

    def compute(self, a, b, /):
        return a - b

    def backward(self, grad, /):
        return self.reduce(grad, -grad)


class Mul(_Binary):
    kind = OpKind.Mul

    def compute(self, a, b, /):
        self.a, self.b = a, b
        return a * b

    def backward(self, grad, /):
        return self.reduce(grad * self.b, grad * self.a)


class Div(_Binary):
    kind = OpKind.Div

    def compute(self, a, b, /):
        self.a, self.b = a, b
        return a / b

    def backward(self, grad, /):
        return self.reduce(grad / self.b, -grad * self.a / (self.b * self.b))


class Neg(Function):
    kind = OpKind.Neg

    def forward(self, a):
        return -a

    def backward(self, grad, /):
        return (-grad,)


class Pow(Function):
    kind = OpKind.Pow

    def forward(self, a, *, exponent: float):
        self.a, self.exponent = a, exponent
        return a**exponent

    def backward(self, grad, /):
        return (grad * self.exponent * self.a ** (self.exponent - 1),)


class Exp(Function):
    kind = OpKind.Exp

    def forward(self, a):
        self.out = np.exp(a)
        return self.out

    def backward(self, grad, /):
        return (grad * self.out,)


class Log(Function):
    kind = OpKind.Log

    def forward(self, a):
        self.a = a
        return np.log(a)

    def backward(self, grad, /):
        return (grad / self.a,)


class Sqrt(Function):
    kind = OpKind.Sqrt

    def forward(self, a):
        self.out = np.sqrt(a)
        return self.out

    def backward(self, grad, /):
        return (grad / (2.0 * self.out),)


class MatMul(Function):
    kind = OpKind.MatMul

    def forward(self, a, b):
        if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
            raise DimensionError(self.kind, a.shape, b.shape)

        self.a, self.b = a, b
        try:
            return np.matmul(a, b)
        except ValueError as error:
            raise DimensionError(self.kind, a.shape, b.shape) from error

    def backward(self, grad, /):
        grad_a = np.matmul(grad, np.swapaxes(self.b, -1, -2))
        grad_b = np.matmul(np.swapaxes(self.a, -1, -2), grad)
        return self.unbroadcast(grad_a, self.a.shape), self.unbroadcast(grad_b, self.b.shape)


class Sum(Function):
    kind = OpKind.Sum

    def forward(self, a, *, axis: Axis, keepdims: bool):
        self.shape = a.shape
        self.axes = _normalise_axes(axis, a.ndim)
        self.keepdims = keepdims
        return np.asarray(a.sum(axis=self.axes, keepdims=keepdims))

    def backward(self, grad, /):
        if not self.keepdims:
            grad = np.expand_dims(grad, self.axes)
        return (np.broadcast_to(grad, self.shape).copy(),)


class Reshape(Function):
    kind = OpKind.Reshape

    def forward(self, a, *, shape: tuple[int, ...]):
        self.shape = a.shape
        try:
            return a.reshape(shape)
        except ValueError as error:
            raise DimensionError(self.kind, a.shape, shape) from error

    def backward(self, grad, /):
        return (grad.reshape(self.shape),)


class Transpose(Function):
    kind = OpKind.Transpose

    def forward(self, a):
        if a.ndim < 2:
            raise DimensionError(self.kind, a.shape)
        return np.swapaxes(a, -1, -2)

    def backward(self, grad, /):
        return (np.swapaxes(grad, -1, -2),)


class Index(Function):
    kind = OpKind.Index

    def forward(self, a, *, key: Any):
        self.shape, self.key = a.shape, key
        return np.array(a[key])

    def backward(self, grad, /):
        out = np.zeros(self.shape)
        np.add.at(out, self.key, grad)
        return (out,)


class Concat(Function):
    kind = OpKind.Concat

    def forward(self, *arrays, axis: int):
        try:
            out = np.concatenate(arrays, axis=axis)
        except ValueError as error:
            raise DimensionError(self.kind, *(array.shape for array in arrays)) from error

        self.axis = axis
        self.splits = np.cumsum([array.shape[axis] for array in arrays])[:-1]
        return out

    def backward(self, grad, /):
        return tuple(np.split(grad, self.splits, axis=self.axis))


class ClampMin(Function):
    kind = OpKind.ClampMin

    def forward(self, a, *, floor: float):
        self.mask = a > floor
        return np.maximum(a, floor)

    def backward(self, grad, /):
        return (grad * self.mask,)


class Diagonal(Function):
    kind = OpKind.Diagonal

    def forward(self, a):
        if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
            raise DimensionError(self.kind, a.shape)
        self.shape = a.shape
        return np.diagonal(a, axis1=-2, axis2=-1).copy()

    def backward(self, grad, /):
        out = np.zeros(self.shape)
        steps = np.arange(self.shape[-1])
        out[..., steps, steps] = grad
        return (out,)


class Elu(Function):
    kind = OpKind.Elu

    def forward(self, a):
        self.positive = a >= 0
        self.negative_exp = np.exp(np.minimum(a, 0.0))
        return np.where(self.positive, a, self.negative_exp - 1.0)

    def backward(self, grad, /):
        return (grad * np.where(self.positive, 1.0, self.negative_exp),)


def add(a: Tensor | ArrayLike, b: Tensor | ArrayLike, /) -> Tensor:
    return Add.apply(as_tensor(a), as_tensor(b))


def sub(a: Tensor | ArrayLike, b: Tensor | ArrayLike, /) -> Tensor:
    return Sub.apply(as_tensor(a), as_tensor(b))


def mul(a: Tensor | ArrayLike, b: Tensor | ArrayLike, /) -> Tensor:
    return Mul.apply(as_tensor(a), as_tensor(b))


def div(a: Tensor | ArrayLike, b: Tensor | ArrayLike, /) -> Tensor:
    return Div.apply(as_tensor(a), as_tensor(b))


def neg(a: Tensor, /) -> Tensor:
    return Neg.apply(a)


def power(a: Tensor, exponent: float, /) -> Tensor:
    return Pow.apply(a, exponent=float(exponent))


def exp(a: Tensor, /) -> Tensor:
    return Exp.apply(a)


def log(a: Tensor, /) -> Tensor:
    return Log.apply(a)


def sqrt(a: Tensor, /) -> Tensor:
    return Sqrt.apply(a)


def matmul(a: Tensor, b: Tensor, /) -> Tensor:
    return MatMul.apply(as_tensor(a), as_tensor(b))


def reduce_sum(a: Tensor, /, *, axis: Axis = None, keepdims: bool = False) -> Tensor:
    return Sum.apply(a, axis=axis, keepdims=keepdims)


def reduce_mean(a: Tensor, /, *, axis: Axis = None, keepdims: bool = False) -> Tensor:
    count = int(np.prod([a.shape[i] for i in _normalise_axes(axis, a.ndim)]))
    return reduce_sum(a, axis=axis, keepdims=keepdims) / float(count)


def reshape(a: Tensor, shape: Sequence[int], /) -> Tensor:
    if len(shape) == 1 and not isinstance(shape[0], int):
        shape = shape[0]
    return Reshape.apply(a, shape=tuple(shape))


def transpose(a: Tensor, /) -> Tensor:
    return Transpose.apply(a)


def index(a: Tensor, key: Any, /) -> Tensor:
    return Index.apply(a, key=key)


def concat(tensors: Sequence[Tensor | ArrayLike], /, *, axis: int = 0) -> Tensor:
    return Concat.apply(*(as_tensor(tensor) for tensor in tensors), axis=axis)


def clamp_min(a: Tensor, floor: float, /) -> Tensor:
    return ClampMin.apply(a, floor=float(floor))


def diagonal(a: Tensor, /) -> Tensor:
    return Diagonal.apply(a)


def elu(a: Tensor, /) -> Tensor:
    return Elu.apply(a)
