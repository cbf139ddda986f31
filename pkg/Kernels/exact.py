from __future__ import annotations

from logging import DEBUG, INFO
from math import log as _log
from math import pi

import numpy as np
from scipy.optimize import minimize

from Autodiff import Tape, Tensor, as_tensor, cholesky, diagonal, solve_triangular
from Common import DimensionError, log

from .hyperparams import GpHyperparams
from .kernel import ard_se_gram

__all__ = ("LOG_2PI", "gp_log_marginal", "gp_posterior", "fit_exact_gp")

LOG_2PI = _log(2.0 * pi)


def _check_training_set(x: Tensor, y: Tensor, hp: GpHyperparams, /) -> None:
    hp.require_single_output()
    if x.ndim != 2 or y.shape != (x.shape[0],) or x.shape[0] < 1 or x.shape[1] != hp.dims:
        raise DimensionError("exact GP", x.shape, y.shape, hp.log_lengthscales.shape)


def _noisy_factor(x: Tensor, hp: GpHyperparams, /) -> Tensor:
    count = x.shape[0]
    gram = ard_se_gram(x, x, hp).reshape(count, count)
    return cholesky(gram + hp.noise_variance * Tensor(np.eye(count)))


def gp_log_marginal(x: Tensor, y: Tensor, hp: GpHyperparams, /) -> Tensor:
    """log N(y | c·1, K + σ_ε²·I), differentiable with respect to the log-hyperparameters."""
    x, y = as_tensor(x), as_tensor(y)
    _check_training_set(x, y, hp)

    count = x.shape[0]
    factor = _noisy_factor(x, hp)
    residual = (y - hp.constant_mean).reshape(count, 1)
    whitened = solve_triangular(factor, residual)

    quadratic = whitened.square().sum()
    log_det = diagonal(factor).log().sum() * 2.0
    return quadratic * -0.5 - log_det * 0.5 - 0.5 * count * LOG_2PI


def gp_posterior(
    x: Tensor, y: Tensor, x_star: Tensor, hp: GpHyperparams, /
) -> tuple[Tensor, Tensor]:
    """Posterior mean [Q] and covariance [Q, Q] of the noise-free outputs at `x_star`."""
    x, y, x_star = as_tensor(x), as_tensor(y), as_tensor(x_star)
    _check_training_set(x, y, hp)
    if x_star.ndim != 2 or x_star.shape[1] != hp.dims:
        raise DimensionError("gp_posterior", x.shape, x_star.shape)

    count, queries = x.shape[0], x_star.shape[0]
    factor = _noisy_factor(x, hp)

    cross = ard_se_gram(x, x_star, hp).reshape(count, queries)
    projected = solve_triangular(factor, cross)
    whitened = solve_triangular(factor, (y - hp.constant_mean).reshape(count, 1))

    mean = hp.constant_mean + (projected.T @ whitened).reshape(queries)
    prior = ard_se_gram(x_star, x_star, hp).reshape(queries, queries)
    covariance = (prior - projected.T @ projected).data

    covariance = 0.5 * (covariance + covariance.T)
    steps = np.arange(queries)
    covariance[steps, steps] = np.maximum(covariance[steps, steps], 0.0)

    return Tensor(mean.data), Tensor(covariance)


def fit_exact_gp(
    x: Tensor,
    y: Tensor,
    hp: GpHyperparams,
    /,
    *,
    max_iter: int = 500,
) -> GpHyperparams:
    """Maximum-marginal-likelihood fit of every hyperparameter with L-BFGS."""
    x, y = as_tensor(x), as_tensor(y)
    fitted = GpHyperparams(*(Tensor(t.data, requires_grad=True) for t in hp.parameters()))
    tensors = fitted.parameters()
    sizes = [tensor.size for tensor in tensors]
    splits = np.cumsum(sizes)[:-1]

    def unpack(theta: np.ndarray) -> None:
        for tensor, chunk in zip(tensors, np.split(theta, splits)):
            tensor.data[...] = chunk.reshape(tensor.shape)

    def objective(theta: np.ndarray) -> tuple[float, np.ndarray]:
        unpack(theta)
        with Tape() as tape:
            loss = -gp_log_marginal(x, y, fitted)
        grads = tape.backward(loss)
        return loss.item(), np.concatenate([grads[tensor].reshape(-1) for tensor in tensors])

    start = np.concatenate([tensor.data.reshape(-1) for tensor in tensors])
    result = minimize(
        objective,
        start,
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": max_iter, "ftol": 1e-15, "gtol": 1e-9},
    )
    unpack(result.x)

    log(f"Exact GP fit: {result.nit} iterations, log marginal {-result.fun:.6f}.", INFO)
    log(f"Exact GP fit stopped with: {result.message}", DEBUG)

    return fitted.detached()
