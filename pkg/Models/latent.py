from __future__ import annotations

from abc import ABC, abstractmethod
from typing import TYPE_CHECKING

import numpy as np

from Autodiff import ParameterStore, Tensor, as_tensor
from Common import DimensionError, ModelFamily
from Kernels import DiagonalGaussian

from .heads import SvdklHead, gaussian_from_output
from .layers import BatchNorm
from .networks import DecoderNet, EncoderNet, ForwardNet

if TYPE_CHECKING:
    from typing import Any, ClassVar, Self

    from Common import ModelConfig

    from .module import Module

    Json = dict[str, Any]

__all__ = ("LatentModel", "SvdklModel", "VaeModel", "build_model")


class LatentModel(ABC):
    """Encoder, decoder and latent forward model sharing one parameter store.

    Subclasses decide how the encoder and forward networks turn into latent
    distributions. Modules are created in a fixed order so a seed fixes every
    initial weight.
    """

    family: ClassVar[ModelFamily]

    def __init__(self, cfg: ModelConfig, control_scale: float, rng: np.random.Generator, /):
        self.config = cfg
        self.control_scale = float(control_scale)
        self.store = ParameterStore()
        self.modules: list[Module] = []
        self.build(rng)
        self.decoder = self.register(DecoderNet(self.store, "decoder", rng, cfg))

    def __repr__(self):
        name, size = type(self).__name__, len(self.store)
        return f"{name}(latent_dim={self.latent_dim}, parameters={size})"

    @abstractmethod
    def build(self, rng: np.random.Generator, /) -> None:
        pass

    @abstractmethod
    def encode(self, x: Tensor, /) -> DiagonalGaussian:
        pass

    @abstractmethod
    def predict_next(self, z: Tensor, u: Tensor | np.ndarray, /) -> DiagonalGaussian:
        pass

    def variational_kl(self) -> tuple[Tensor, Tensor]:
        """KL[q ‖ p] of the encoder and forward-model inducing values."""
        return Tensor(0.0), Tensor(0.0)

    @property
    def latent_dim(self) -> int:
        return self.config.latent_dim

    @property
    def training(self) -> bool:
        return all(module.training for module in self.modules)

    def register(self, module: Module, /) -> Module:
        self.modules.append(module)
        return module

    def train(self, mode: bool = True, /) -> Self:
        for module in self.modules:
            module.train(mode)
        return self

    def eval(self) -> Self:
        return self.train(False)

    def check_measurement(self, x: Tensor, /) -> Tensor:
        x = as_tensor(x)
        if x.ndim != 4 or x.shape[1:] != self.config.measurement_shape:
            raise DimensionError("encode", x.shape, (-1, *self.config.measurement_shape))
        return x

    def check_latent(self, z: Tensor, /) -> Tensor:
        z = as_tensor(z)
        if z.ndim != 2 or z.shape[1] != self.latent_dim:
            raise DimensionError("latent", z.shape, (-1, self.latent_dim))
        return z

    def decode(self, z: Tensor, /) -> Tensor:
        """Mean image of p(x | z); the variance is fixed at one."""
        return self.decoder(self.check_latent(z))

    def sample_latent(
        self,
        d: DiagonalGaussian,
        rng: np.random.Generator | None = None,
        /,
        *,
        epsilon: np.ndarray | None = None,
    ) -> Tensor:
        """Reparametrised draw mean + std ⊙ ε; ε = 0 without `rng` or `epsilon`."""
        if epsilon is None:
            epsilon = rng.standard_normal(d.shape) if rng is not None else np.zeros(d.shape)
        if epsilon.shape != d.shape:
            raise DimensionError("sample_latent", epsilon.shape, d.shape)
        return d.mean + d.std * Tensor(epsilon)

    def rollout(self, z: Tensor, controls: np.ndarray, /) -> list[DiagonalGaussian]:
        """Open-loop prediction in latent space, feeding each predicted mean forward.

        `controls` is [T] for a single start or [T, B].
        """
        z = self.check_latent(z)
        controls = np.asarray(controls, dtype=np.float64)
        if controls.ndim == 1:
            controls = controls[:, None]

        predictions = []
        for u in controls:
            prediction = self.predict_next(z, u)
            predictions.append(prediction)
            z = prediction.mean

        return predictions

    def snapshot(self) -> Json:
        return {"model": self.config.snapshot(), "control_scale": self.control_scale}


class SvdklModel(LatentModel):
    family = ModelFamily.SVDKL

    def build(self, rng: np.random.Generator, /) -> None:
        cfg, z = self.config, self.config.latent_dim
        options = {"momentum": cfg.bn_momentum, "eps": cfg.bn_eps}

        self.encoder = self.register(EncoderNet(self.store, "encoder", rng, cfg, z))
        self.encoder_features = self.register(
            BatchNorm(self.store, "encoder_features", z, **options)
        )
        self.encoder_head = self.register(SvdklHead(self.store, "encoder_head", cfg))

        self.forward = self.register(
            ForwardNet(self.store, "forward", rng, cfg, z, self.control_scale)
        )
        self.forward_features = self.register(
            BatchNorm(self.store, "forward_features", z, **options)
        )
        self.forward_head = self.register(SvdklHead(self.store, "forward_head", cfg))

    def encode(self, x: Tensor, /) -> DiagonalGaussian:
        features = self.encoder_features(self.encoder(self.check_measurement(x)))
        return self.encoder_head(features)

    def predict_next(self, z: Tensor, u: Tensor | np.ndarray, /) -> DiagonalGaussian:
        features = self.forward_features(self.forward(self.check_latent(z), u))
        return self.forward_head(features)

    def variational_kl(self) -> tuple[Tensor, Tensor]:
        return self.encoder_head.kl(), self.forward_head.kl()


class VaeModel(LatentModel):
    """Same trunks as the SVDKL model with the GP heads swapped for mean/log-std outputs."""

    family = ModelFamily.VAE

    def build(self, rng: np.random.Generator, /) -> None:
        cfg, z = self.config, self.config.latent_dim
        self.encoder = self.register(EncoderNet(self.store, "encoder", rng, cfg, 2 * z))
        self.forward = self.register(
            ForwardNet(self.store, "forward", rng, cfg, 2 * z, self.control_scale)
        )

    def encode(self, x: Tensor, /) -> DiagonalGaussian:
        out = self.encoder(self.check_measurement(x))
        return gaussian_from_output(out, self.config.std_floor)

    def predict_next(self, z: Tensor, u: Tensor | np.ndarray, /) -> DiagonalGaussian:
        out = self.forward(self.check_latent(z), u)
        return gaussian_from_output(out, self.config.std_floor)


_FAMILIES: dict[ModelFamily, type[LatentModel]] = {
    ModelFamily.SVDKL: SvdklModel,
    ModelFamily.VAE: VaeModel,
}


def build_model(
    cfg: ModelConfig, control_scale: float, rng: np.random.Generator, /
) -> LatentModel:
    return _FAMILIES[cfg.family](cfg, control_scale, rng)
