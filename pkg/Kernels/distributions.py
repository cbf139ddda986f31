from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from Autodiff import Tensor
from Common import ContractError, DimensionError

__all__ = ("DiagonalGaussian", "gaussian_kl")


@dataclass(eq=False)
class DiagonalGaussian:
    mean: Tensor
    std: Tensor

    def __post_init__(self):
        if self.mean.shape != self.std.shape:
            raise DimensionError("DiagonalGaussian", self.mean.shape, self.std.shape)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.mean.shape

    @property
    def variance(self) -> Tensor:
        return self.std.square()

    def detach(self) -> DiagonalGaussian:
        return DiagonalGaussian(self.mean.detach(), self.std.detach())

    def __getitem__(self, key) -> DiagonalGaussian:
        return DiagonalGaussian(self.mean[key], self.std[key])


def gaussian_kl(p: DiagonalGaussian, q: DiagonalGaussian, /) -> Tensor:
    """KL[p ‖ q] summed over every element."""
    if p.shape != q.shape:
        raise DimensionError("gaussian_kl", p.shape, q.shape)
    if np.any(p.std.data <= 0) or np.any(q.std.data <= 0):
        raise ContractError("gaussian_kl needs strictly positive standard deviations.")

    log_ratio = q.std.log() - p.std.log()
    spread = (p.variance + (p.mean - q.mean).square()) / (q.variance * 2.0)
    return (log_ratio + spread - 0.5).sum()
