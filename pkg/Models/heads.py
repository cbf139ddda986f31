from __future__ import annotations

from math import exp
from typing import TYPE_CHECKING

from Autodiff import ParameterGroup, clamp_min
from Common import DimensionError
from Kernels import (
    DiagonalGaussian,
    GpHyperparams,
    VariationalGaussian,
    make_inducing_grid,
    svgp_kl_term,
    svgp_predict,
)

from .module import Module

if TYPE_CHECKING:
    from Autodiff import ParameterStore, Tensor
    from Common import ModelConfig

__all__ = ("SvdklHead", "gaussian_from_output")


class SvdklHead(Module):
    """|z| independent constant-mean ARD-SE GPs over a shared inducing grid.

    The GP hyperparameters and the variational posterior are registered in the
    GP parameter group; q starts at the prior.
    """

    def __init__(self, store: ParameterStore, prefix: str, cfg: ModelConfig, /):
        super().__init__(store, prefix)
        outputs = dims = cfg.latent_dim
        self.std_floor = cfg.std_floor
        self.grid = make_inducing_grid(cfg.inducing_points, dims, cfg.grid_low, cfg.grid_high)

        initial = GpHyperparams.create(
            signal_variance=exp(cfg.init_log_signal_variance),
            lengthscales=exp(cfg.init_log_lengthscale),
            noise_variance=exp(cfg.init_log_noise_variance),
            mean=0.0,
            outputs=outputs,
            dims=dims,
        )
        prior = VariationalGaussian.prior(self.grid, initial)

        gp = ParameterGroup.GP
        self.hp = GpHyperparams(
            self.parameter("log_signal_variance", initial.log_signal_variance.data, gp),
            self.parameter("log_lengthscales", initial.log_lengthscales.data, gp),
            self.parameter("log_noise_variance", initial.log_noise_variance.data, gp),
            self.parameter("constant_mean", initial.constant_mean.data, gp),
        )
        self.q = VariationalGaussian(
            self.parameter("q_mean", prior.mean.data, gp),
            self.parameter("q_raw", prior.raw.data, gp),
        )

    def __call__(self, features: Tensor, /) -> DiagonalGaussian:
        return svgp_predict(features, self.grid, self.q, self.hp, std_floor=self.std_floor)

    def kl(self) -> Tensor:
        return svgp_kl_term(self.q, self.grid, self.hp)


def gaussian_from_output(out: Tensor, std_floor: float, /) -> DiagonalGaussian:
    """Splits a [B, 2·|z|] network output into a mean and a floored std from its log."""
    if out.ndim != 2 or out.shape[1] % 2:
        raise DimensionError("gaussian_from_output", out.shape)

    half = out.shape[1] // 2
    std = clamp_min(out[:, half:].exp(), std_floor)
    return DiagonalGaussian(out[:, :half], std)
