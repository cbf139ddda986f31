from __future__ import annotations

from typing import TYPE_CHECKING

from Autodiff import as_tensor
from Common import DimensionError

if TYPE_CHECKING:
    from Autodiff import Tensor

    from .hyperparams import GpHyperparams

__all__ = ("ard_se_gram", "ard_se_kernel")


def _per_output(x: Tensor, outputs: int, /) -> Tensor:
    # [N, d] inputs are shared by every output GP
    if x.ndim == 2:
        return x.reshape(1, *x.shape)
    if x.ndim == 3 and x.shape[0] in (1, outputs):
        return x
    raise DimensionError("ard_se_gram", x.shape)


def ard_se_gram(x1: Tensor, x2: Tensor, hp: GpHyperparams, /) -> Tensor:
    """Gram matrices σ_f²·exp(−½·Σ_j (x_j − x'_j)² / l_j²) for every output GP.

    `x1` is [N, d] or [Z, N, d], `x2` is [M, d] or [Z, M, d]; the result is [Z, N, M].
    """
    x1, x2 = as_tensor(x1), as_tensor(x2)
    outputs, dims = hp.outputs, hp.dims

    if x1.shape[-1] != dims or x2.shape[-1] != dims:
        raise DimensionError("ard_se_gram", x1.shape, x2.shape, hp.log_lengthscales.shape)

    x1, x2 = _per_output(x1, outputs), _per_output(x2, outputs)
    lengthscales = hp.lengthscales.reshape(outputs, 1, dims)

    scaled1 = x1 / lengthscales
    scaled2 = x2 / lengthscales
    n, m = scaled1.shape[1], scaled2.shape[1]

    diff = scaled1.reshape(outputs, n, 1, dims) - scaled2.reshape(outputs, 1, m, dims)
    distance = diff.square().sum(axis=-1)

    return hp.signal_variance.reshape(outputs, 1, 1) * (distance * -0.5).exp()


def ard_se_kernel(x: Tensor, x_prime: Tensor, hp: GpHyperparams, /) -> Tensor:
    hp.require_single_output()

    x, x_prime = as_tensor(x), as_tensor(x_prime)
    if x.shape != (hp.dims,) or x_prime.shape != (hp.dims,):
        raise DimensionError("ard_se_kernel", x.shape, x_prime.shape, hp.log_lengthscales.shape)

    gram = ard_se_gram(x.reshape(1, hp.dims), x_prime.reshape(1, hp.dims), hp)
    return gram.reshape(())
