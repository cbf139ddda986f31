from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from Autodiff import Tensor
from Common import ConfigurationError, ContractError, DimensionError

if TYPE_CHECKING:
    from collections.abc import Sequence

__all__ = ("VARIANCE_FLOOR", "GpHyperparams")

# Requested variances of exactly zero are stored as this value
VARIANCE_FLOOR = 1e-12


def _log_positive(values: np.ndarray, name: str, /) -> np.ndarray:
    if np.any(values < 0):
        raise ConfigurationError(f"{name} must be non-negative.")
    return np.log(np.maximum(values, VARIANCE_FLOOR))


@dataclass(eq=False)
class GpHyperparams:
    """Hyperparameters of Z independent constant-mean ARD-SE GPs.

    Positive quantities are held as logarithms; `signal_variance` etc. read them
    back through `exp` so gradients reach the log-values.
    """

    log_signal_variance: Tensor  # [Z]
    log_lengthscales: Tensor  # [Z, d]
    log_noise_variance: Tensor  # [Z]
    constant_mean: Tensor  # [Z]

    def __post_init__(self):
        outputs = self.log_signal_variance.shape[0]
        if (
            self.log_signal_variance.shape != (outputs,)
            or self.log_noise_variance.shape != (outputs,)
            or self.constant_mean.shape != (outputs,)
            or self.log_lengthscales.ndim != 2
            or self.log_lengthscales.shape[0] != outputs
        ):
            raise DimensionError(
                "GpHyperparams",
                self.log_signal_variance.shape,
                self.log_lengthscales.shape,
                self.log_noise_variance.shape,
                self.constant_mean.shape,
            )

    @classmethod
    def create(
        cls,
        *,
        signal_variance: float | Sequence[float] = 1.0,
        lengthscales: float | Sequence[float] | np.ndarray = 1.0,
        noise_variance: float | Sequence[float] = 1e-2,
        mean: float | Sequence[float] = 0.0,
        outputs: int = 1,
        dims: int = 1,
        requires_grad: bool = False,
    ) -> GpHyperparams:
        lengthscales = np.asarray(lengthscales, dtype=np.float64)
        lengthscales = np.broadcast_to(lengthscales, (outputs, dims))
        if np.any(lengthscales <= 0):
            raise ConfigurationError("Lengthscales must be positive.")

        def per_output(value) -> np.ndarray:
            return np.broadcast_to(np.asarray(value, dtype=np.float64), (outputs,)).copy()

        values = (
            _log_positive(per_output(signal_variance), "signal variance"),
            np.log(lengthscales),
            _log_positive(per_output(noise_variance), "noise variance"),
            per_output(mean),
        )
        return cls(*(Tensor(value, requires_grad=requires_grad) for value in values))

    @property
    def outputs(self) -> int:
        return self.log_signal_variance.shape[0]

    @property
    def dims(self) -> int:
        return self.log_lengthscales.shape[1]

    @property
    def signal_variance(self) -> Tensor:
        return self.log_signal_variance.exp()

    @property
    def lengthscales(self) -> Tensor:
        return self.log_lengthscales.exp()

    @property
    def noise_variance(self) -> Tensor:
        return self.log_noise_variance.exp()

    def parameters(self) -> list[Tensor]:
        return [
            self.log_signal_variance,
            self.log_lengthscales,
            self.log_noise_variance,
            self.constant_mean,
        ]

    def detached(self) -> GpHyperparams:
        return GpHyperparams(*(Tensor(tensor.data) for tensor in self.parameters()))

    def require_single_output(self) -> None:
        if self.outputs != 1:
            raise ContractError(f"Expected one output, got {self.outputs}.")
