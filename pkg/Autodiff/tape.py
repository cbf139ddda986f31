from __future__ import annotations

from contextvars import ContextVar
from enum import StrEnum
from logging import DEBUG
from typing import TYPE_CHECKING

import numpy as np

from Common import ContractError, format_shape, log

if TYPE_CHECKING:
    from collections.abc import Iterator
    from contextvars import Token
    from typing import Self

    from .tensor import Function, Tensor

__all__ = (
    "OpKind",
    "TapeNode",
    "GradientStore",
    "Tape",
    "active_tape",
)


class OpKind(StrEnum):
    Add = "add"
    Sub = "sub"
    Mul = "mul"
    Div = "div"
    Neg = "neg"
    Pow = "pow"
    Exp = "exp"
    Log = "log"
    Sqrt = "sqrt"
    MatMul = "matmul"
    Sum = "sum"
    Reshape = "reshape"
    Transpose = "transpose"
    Index = "index"
    Concat = "concat"
    ClampMin = "clamp_min"
    Diagonal = "diagonal"
    Elu = "elu"
    Conv2d = "conv2d"
    ConvTranspose2d = "conv_transpose2d"
    Cholesky = "cholesky"
    SolveTriangular = "solve_triangular"


_active: ContextVar[Tape | None] = ContextVar("active_tape", default=None)


def active_tape() -> Tape | None:
    return _active.get()


class TapeNode:
    __slots__ = ("tape", "kind", "function", "inputs", "value", "grad")

    def __init__(self, tape: Tape, function: Function, inputs: tuple[Tensor, ...], value, /):
        self.tape = tape
        self.kind: OpKind = function.kind
        self.function = function
        self.inputs = inputs
        self.value: np.ndarray = value
        self.grad: np.ndarray | None = None

    def __repr__(self):
        return f"TapeNode({self.kind}, {format_shape(self.value.shape)})"

    def accumulate(self, grad: np.ndarray, /) -> None:
        if self.grad is None:
            self.grad = np.array(grad, dtype=np.float64)
        else:
            self.grad += grad


class GradientStore:
    """Gradients of one backward pass, keyed by leaf tensor identity.

    Leaves the root does not depend on read back as zeros of the leaf's shape.
    """

    __slots__ = ("_grads", "_leaves")

    def __init__(self):
        self._grads: dict[int, np.ndarray] = {}
        self._leaves: dict[int, Tensor] = {}

    def __len__(self) -> int:
        return len(self._grads)

    def __contains__(self, tensor: Tensor) -> bool:
        return id(tensor) in self._grads

    def __getitem__(self, tensor: Tensor) -> np.ndarray:
        grad = self._grads.get(id(tensor))
        if grad is None:
            return np.zeros_like(tensor.data)
        return grad

    def items(self) -> Iterator[tuple[Tensor, np.ndarray]]:
        for key, grad in self._grads.items():
            yield self._leaves[key], grad

    def accumulate(self, tensor: Tensor, grad: np.ndarray, /) -> None:
        key = id(tensor)
        if key in self._grads:
            self._grads[key] += grad
        else:
            self._grads[key] = np.array(grad, dtype=np.float64)
            self._leaves[key] = tensor


class Tape:
    """Records differentiable operations while active.

    Operations applied outside any active tape are not recorded, which is how
    evaluation runs without building a graph. A tape supports one backward
    pass; record again only after `reset()`.
    """

    def __init__(self):
        self.nodes: list[TapeNode] = []
        self.consumed = False
        self._token: Token | None = None

    def __repr__(self):
        return f"Tape(nodes={len(self.nodes)}, consumed={self.consumed})"

    def __enter__(self) -> Self:
        self.__start__()
        return self

    def __exit__(self, *_) -> None:
        self.__stop__()

    def __start__(self) -> None:
        if self._token is not None:
            raise ContractError("Tape is already active.")
        self._token = _active.set(self)

    def __stop__(self) -> None:
        _active.reset(self._token)
        self._token = None

    def reset(self) -> None:
        self.nodes.clear()
        self.consumed = False

    def record(self, function: Function, inputs: tuple[Tensor, ...], value, /) -> TapeNode:
        if self.consumed:
            raise ContractError("Cannot record on a consumed tape; call reset() first.")

        node = TapeNode(self, function, inputs, value)
        self.nodes.append(node)
        return node

    def owns(self, tensor: Tensor, /) -> bool:
        return tensor.node is not None and tensor.node.tape is self

    def backward(self, root: Tensor, /) -> GradientStore:
        if self.consumed:
            raise ContractError("Tape already consumed by a backward pass; call reset() first.")
        if root.data.size != 1:
            raise ContractError(
                f"backward needs a scalar root, got {format_shape(root.shape)}."
            )

        store = GradientStore()
        self.consumed = True

        if not root.requires_grad:
            return store

        if not self.owns(root):
            store.accumulate(root, np.ones_like(root.data))
            root.grad = store[root]
            return store

        root.node.accumulate(np.ones_like(root.data))

        # Nodes are appended in creation order, so reversing it is a topological order
        for node in reversed(self.nodes):
            if node.grad is None:
                continue

            input_grads = node.function.backward(node.grad)

            for tensor, grad in zip(node.inputs, input_grads):
                if grad is None or not tensor.requires_grad:
                    continue
                if self.owns(tensor):
                    tensor.node.accumulate(grad)
                else:
                    store.accumulate(tensor, grad)

        for tensor, grad in store.items():
            tensor.grad = grad

        log(f"Backward pass over {len(self.nodes)} nodes reached {len(store)} leaves.", DEBUG)
        return store
