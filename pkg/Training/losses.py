from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from Autodiff import Tensor, as_tensor, concat
from Common import DimensionError
from Kernels import LOG_2PI, gaussian_kl

if TYPE_CHECKING:
    from Common import TrainConfig
    from Kernels import DiagonalGaussian
    from Models import LatentModel

__all__ = (
    "Batch",
    "LossBreakdown",
    "reconstruction_nll",
    "balanced_kl",
    "recon_loss",
    "dyn_loss",
    "total_loss",
)


@dataclass(frozen=True, eq=False)
class Batch:
    """Model inputs for one step: noisy measurements and noisy controls only."""

    frames: Tensor  # [B, 2C, H, W]
    controls: np.ndarray  # [B]
    next_frames: Tensor  # [B, 2C, H, W]

    def __post_init__(self):
        if (
            self.frames.shape != self.next_frames.shape
            or self.controls.shape != (self.frames.shape[0],)
        ):
            shapes = self.frames.shape, self.controls.shape, self.next_frames.shape
            raise DimensionError("Batch", *shapes)

    @classmethod
    def create(
        cls, frames: np.ndarray, controls: np.ndarray, next_frames: np.ndarray, /
    ) -> Batch:
        return cls(Tensor(frames), np.asarray(controls, dtype=np.float64), Tensor(next_frames))

    @property
    def size(self) -> int:
        return self.frames.shape[0]


@dataclass(frozen=True, eq=False)
class LossBreakdown:
    recon: Tensor
    dyn: Tensor
    var_kl_enc: Tensor
    var_kl_fwd: Tensor
    total: Tensor

    def values(self) -> dict[str, float]:
        return {
            "recon_loss": self.recon.item(),
            "dyn_loss": self.dyn.item(),
            "var_kl_enc": self.var_kl_enc.item(),
            "var_kl_fwd": self.var_kl_fwd.item(),
            "total": self.total.item(),
        }


def reconstruction_nll(x: Tensor, mean: Tensor, /) -> Tensor:
    """−log N(x | mean, I) summed over pixels and averaged over the batch."""
    x = as_tensor(x)
    if x.shape != mean.shape:
        raise DimensionError("reconstruction_nll", x.shape, mean.shape)

    pixels = x.size // x.shape[0]
    squared = (x - mean).square().sum() / float(x.shape[0])
    return squared * 0.5 + 0.5 * pixels * LOG_2PI


def balanced_kl(
    posterior: DiagonalGaussian, prior: DiagonalGaussian, alpha: float, /
) -> Tensor:
    """α·KL[sg(posterior) ‖ prior] + (1 − α)·KL[posterior ‖ sg(prior)] per batch element.

    Both parts have the same value, so only the gradient routing depends on α.
    """
    count = float(posterior.shape[0])
    value = Tensor(0.0)

    if alpha > 0:
        value = value + gaussian_kl(posterior.detach(), prior) * alpha
    if alpha < 1:
        value = value + gaussian_kl(posterior, prior.detach()) * (1.0 - alpha)

    return value / count


@dataclass(frozen=True, eq=False)
class _Pass:
    recon: Tensor
    dyn: Tensor


def _forward(
    batch: Batch, model: LatentModel, alpha: float, epsilon: np.ndarray | None, /
) -> _Pass:
    # One encoder pass over x_t and x_{t+1} together, shared by both loss terms
    size = batch.size
    encoded = model.encode(concat([batch.frames, batch.next_frames], axis=0))
    current, following = encoded[:size], encoded[size:]

    z = model.sample_latent(current, epsilon=epsilon)
    recon = reconstruction_nll(batch.frames, model.decode(z))
    dyn = balanced_kl(following, model.predict_next(z, batch.controls), alpha)
    return _Pass(recon, dyn)


def recon_loss(
    batch: Batch, model: LatentModel, /, *, epsilon: np.ndarray | None = None
) -> Tensor:
    return _forward(batch, model, 1.0, epsilon).recon


def dyn_loss(
    batch: Batch, model: LatentModel, alpha: float, /, *, epsilon: np.ndarray | None = None
) -> Tensor:
    return _forward(batch, model, alpha, epsilon).dyn


def total_loss(
    batch: Batch, model: LatentModel, cfg: TrainConfig, /, *, epsilon: np.ndarray | None = None
) -> LossBreakdown:
    """recon + β·dyn + λ_var·(KL_enc + KL_fwd), each normalised per batch element.

    `epsilon` is the reparametrisation noise for z_t ([B, |z|]); zeros when omitted.
    """
    parts = _forward(batch, model, cfg.alpha, epsilon)
    kl_enc, kl_fwd = model.variational_kl()
    var_kl_enc, var_kl_fwd = kl_enc / float(batch.size), kl_fwd / float(batch.size)

    total = parts.recon + parts.dyn * cfg.beta + (var_kl_enc + var_kl_fwd) * cfg.var_weight
    return LossBreakdown(parts.recon, parts.dyn, var_kl_enc, var_kl_fwd, total)
