from __future__ import annotations

from dataclasses import dataclass
from logging import DEBUG, INFO
from typing import TYPE_CHECKING

import numpy as np
from scipy.optimize import minimize

from Autodiff import (
    Tape,
    Tensor,
    as_tensor,
    cholesky,
    clamp_min,
    diagonal,
    solve_triangular,
)
from Common import ContractError, DimensionError, log

from .distributions import DiagonalGaussian
from .exact import LOG_2PI
from .hyperparams import GpHyperparams
from .kernel import ard_se_gram

if TYPE_CHECKING:
    from .grid import InducingGrid

__all__ = (
    "DEFAULT_STD_FLOOR",
    "VariationalGaussian",
    "svgp_predict",
    "svgp_kl_term",
    "svgp_elbo",
    "fit_svgp",
)

DEFAULT_STD_FLOOR = 1e-4


@dataclass(eq=False)
class VariationalGaussian:
    """q(v) = N(m, L·Lᵀ) for each of Z output GPs.

    `raw` holds the strictly lower part of L as-is and the diagonal as
    logarithms, so every value of `raw` gives a valid factor.
    """

    mean: Tensor  # [Z, P]
    raw: Tensor  # [Z, P, P]

    def __post_init__(self):
        outputs, size = self.mean.shape
        if self.raw.shape != (outputs, size, size):
            raise DimensionError("VariationalGaussian", self.mean.shape, self.raw.shape)

    @classmethod
    def from_cholesky(
        cls, mean: np.ndarray, factor: np.ndarray, /, *, requires_grad: bool = False
    ) -> VariationalGaussian:
        factor = np.asarray(factor, dtype=np.float64)
        steps = np.arange(factor.shape[-1])
        diagonal_values = factor[..., steps, steps]

        if np.any(diagonal_values <= 0):
            raise ContractError("A Cholesky factor needs a strictly positive diagonal.")

        raw = np.tril(factor, -1)
        raw[..., steps, steps] = np.log(diagonal_values)
        return cls(
            Tensor(mean, requires_grad=requires_grad),
            Tensor(raw, requires_grad=requires_grad),
        )

    @classmethod
    def prior(
        cls, grid: InducingGrid, hp: GpHyperparams, /, *, requires_grad: bool = False
    ) -> VariationalGaussian:
        points = grid.tensor()
        factor = cholesky(ard_se_gram(points, points, hp))
        mean = np.repeat(hp.constant_mean.data[:, None], grid.size, axis=1)
        return cls.from_cholesky(mean, factor.data, requires_grad=requires_grad)

    @property
    def outputs(self) -> int:
        return self.mean.shape[0]

    @property
    def size(self) -> int:
        return self.mean.shape[1]

    def factor(self) -> Tensor:
        eye = np.eye(self.size)
        strictly_lower = np.tril(np.ones((self.size, self.size)), -1)
        return self.raw * Tensor(strictly_lower) + self.raw.exp() * Tensor(eye)

    def covariance(self) -> Tensor:
        factor = self.factor()
        return factor @ factor.T

    def parameters(self) -> list[Tensor]:
        return [self.mean, self.raw]


def _check_compatible(grid: InducingGrid, q: VariationalGaussian, hp: GpHyperparams, /) -> None:
    if q.size != grid.size or q.outputs != hp.outputs or grid.dims != hp.dims:
        raise DimensionError("svgp", grid.points.shape, q.mean.shape, hp.log_lengthscales.shape)


def _latent_moments(
    features: Tensor, grid: InducingGrid, q: VariationalGaussian, hp: GpHyperparams, /
) -> tuple[Tensor, Tensor]:
    # Predictive mean and noise-free variance of f, both [Z, B]
    features = as_tensor(features)
    _check_compatible(grid, q, hp)
    if features.ndim != 2 or features.shape[1] != hp.dims:
        raise DimensionError("svgp_predict", features.shape, grid.points.shape)

    outputs, size = hp.outputs, grid.size
    points = grid.tensor()

    prior_factor = cholesky(ard_se_gram(points, points, hp))
    cross = ard_se_gram(points, features, hp)  # [Z, P, B]

    projected = solve_triangular(prior_factor, cross)
    weights = solve_triangular(prior_factor, projected, transpose=True)

    mean_offset = (q.mean - hp.constant_mean.reshape(outputs, 1)).reshape(outputs, size, 1)
    mean = hp.constant_mean.reshape(outputs, 1) + (weights * mean_offset).sum(axis=1)

    spread = q.factor().T @ weights
    variance = (
        hp.signal_variance.reshape(outputs, 1)
        - projected.square().sum(axis=1)
        + spread.square().sum(axis=1)
    )
    return mean, variance


def svgp_predict(
    features: Tensor,
    grid: InducingGrid,
    q: VariationalGaussian,
    hp: GpHyperparams,
    /,
    *,
    std_floor: float = DEFAULT_STD_FLOOR,
) -> DiagonalGaussian:
    """Sparse variational predictive distribution of y = f + ε at `features` [B, d].

    Returns a [B, Z] diagonal Gaussian; the additive noise σ_ε² is folded into the
    variance and the standard deviation never falls below `std_floor`.
    """
    mean, variance = _latent_moments(features, grid, q, hp)
    variance = clamp_min(variance + hp.noise_variance.reshape(hp.outputs, 1), std_floor**2)
    return DiagonalGaussian(mean.T, variance.sqrt().T)


def svgp_kl_term(q: VariationalGaussian, grid: InducingGrid, hp: GpHyperparams, /) -> Tensor:
    """KL[q(v) ‖ p(v)] with p(v) = N(c·1, K_vv), summed over the output GPs."""
    _check_compatible(grid, q, hp)

    outputs, size = q.outputs, q.size
    points = grid.tensor()
    prior_factor = cholesky(ard_se_gram(points, points, hp))

    trace = solve_triangular(prior_factor, q.factor()).square().sum()
    offset = (q.mean - hp.constant_mean.reshape(outputs, 1)).reshape(outputs, size, 1)
    mahalanobis = solve_triangular(prior_factor, offset).square().sum()

    log_det_prior = diagonal(prior_factor).log().sum() * 2.0
    log_det_q = diagonal(q.raw).sum() * 2.0

    return (trace + mahalanobis - float(outputs * size) + log_det_prior - log_det_q) * 0.5


def svgp_elbo(
    features: Tensor,
    targets: Tensor,
    grid: InducingGrid,
    q: VariationalGaussian,
    hp: GpHyperparams,
    /,
) -> Tensor:
    """Evidence lower bound for Gaussian-likelihood regression; `targets` is [B, Z]."""
    targets = as_tensor(targets)
    mean, variance = _latent_moments(features, grid, q, hp)

    if targets.shape != (mean.shape[1], mean.shape[0]):
        raise DimensionError("svgp_elbo", targets.shape, mean.T.shape)

    noise = hp.noise_variance.reshape(hp.outputs, 1)
    residual = (targets.T - mean).square() + variance
    expected = (noise.log() + LOG_2PI) * -0.5 - residual / (noise * 2.0)

    return expected.sum() - svgp_kl_term(q, grid, hp)


def fit_svgp(
    features: Tensor,
    targets: Tensor,
    grid: InducingGrid,
    q: VariationalGaussian,
    hp: GpHyperparams,
    /,
    *,
    fit_hyperparameters: bool = False,
    max_iter: int = 5000,
) -> tuple[VariationalGaussian, GpHyperparams]:
    """Maximises `svgp_elbo` over q (and optionally the hyperparameters) with L-BFGS."""
    q = VariationalGaussian(*(Tensor(t.data, requires_grad=True) for t in q.parameters()))
    hp = GpHyperparams(
        *(Tensor(tensor.data, requires_grad=fit_hyperparameters) for tensor in hp.parameters())
    )

    tensors = q.parameters() + (hp.parameters() if fit_hyperparameters else [])
    splits = np.cumsum([tensor.size for tensor in tensors])[:-1]

    def unpack(theta: np.ndarray) -> None:
        for tensor, chunk in zip(tensors, np.split(theta, splits)):
            tensor.data[...] = chunk.reshape(tensor.shape)

    def objective(theta: np.ndarray) -> tuple[float, np.ndarray]:
        unpack(theta)
        with Tape() as tape:
            loss = -svgp_elbo(features, targets, grid, q, hp)
        grads = tape.backward(loss)
        return loss.item(), np.concatenate([grads[tensor].reshape(-1) for tensor in tensors])

    start = np.concatenate([tensor.data.reshape(-1) for tensor in tensors])
    result = minimize(
        objective,
        start,
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": max_iter, "maxfun": 2 * max_iter, "ftol": 1e-15, "gtol": 1e-10},
    )
    unpack(result.x)

    log(f"SVGP fit: {result.nit} iterations, ELBO {-result.fun:.6f}.", INFO)
    log(f"SVGP fit stopped with: {result.message}", DEBUG)

    fitted_q = VariationalGaussian(Tensor(q.mean.data), Tensor(q.raw.data))
    return fitted_q, hp.detached()
