from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from Autodiff import Tensor
from Common import ConfigurationError

__all__ = ("InducingGrid", "make_inducing_grid")


@dataclass(frozen=True, eq=False)
class InducingGrid:
    points: np.ndarray  # [P, d]
    shared: bool = True

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dims(self) -> int:
        return self.points.shape[1]

    def tensor(self) -> Tensor:
        return Tensor(self.points)


def make_inducing_grid(size: int, dims: int, low: float, high: float, /) -> InducingGrid:
    """`size` fixed inducing points evenly spaced along the diagonal of [low, high]^dims."""
    if size < 2:
        raise ConfigurationError(f"An inducing grid needs at least 2 points, got {size}.")
    if dims < 1:
        raise ConfigurationError(f"Inducing points need a feature dimension, got {dims}.")
    if not low < high:
        raise ConfigurationError(f"Inducing grid needs low < high, got [{low}, {high}].")

    line = np.linspace(low, high, size)
    return InducingGrid(np.repeat(line[:, None], dims, axis=1))
