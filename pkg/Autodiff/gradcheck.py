from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np

from Common import ContractError

from .tape import Tape

if TYPE_CHECKING:
    from collections.abc import Callable, Sequence

    from .tensor import Tensor

__all__ = ("finite_diff_check",)


def _evaluate(function: Callable[[], Tensor], /) -> float:
    return function().item()


def finite_diff_check(
    function: Callable[[], Tensor],
    tensors: Sequence[Tensor],
    h: float = 1e-5,
    /,
    *,
    max_coordinates: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Compares reverse-mode gradients with central differences.

    `function` is re-evaluated without a tape after perturbing one coordinate of
    one of `tensors` at a time. With `max_coordinates` only that many randomly
    chosen coordinates per tensor are checked. Returns the largest
    |analytic − numeric| / max(1, |analytic|).
    """
    if h <= 0:
        raise ContractError(f"Finite-difference step must be positive, got {h}.")

    with Tape() as tape:
        root = function()
    grads = tape.backward(root)

    worst = 0.0
    rng = rng or np.random.default_rng(0)

    for tensor in tensors:
        analytic = grads[tensor].reshape(-1)
        flat = tensor.data.reshape(-1)

        coordinates = np.arange(flat.size)
        if max_coordinates is not None and flat.size > max_coordinates:
            coordinates = np.sort(rng.choice(flat.size, size=max_coordinates, replace=False))

        for i in coordinates:
            original = flat[i]

            flat[i] = original + h
            upper = _evaluate(function)
            flat[i] = original - h
            lower = _evaluate(function)
            flat[i] = original

            numeric = (upper - lower) / (2.0 * h)
            error = abs(analytic[i] - numeric) / max(1.0, abs(analytic[i]))
            worst = max(worst, error)

    return float(worst)
