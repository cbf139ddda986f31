from __future__ import annotations

from typing import TYPE_CHECKING

from Autodiff import as_tensor, concat, elu
from Common import ConfigurationError

from .layers import BatchNorm, Conv, ConvTranspose, Dense
from .module import Module

if TYPE_CHECKING:
    import numpy as np

    from Autodiff import ParameterStore, Tensor
    from Common import ModelConfig

__all__ = (
    "downsampled_extent",
    "decoder_output_padding",
    "EncoderNet",
    "DecoderNet",
    "ForwardNet",
)


def downsampled_extent(size: int, /) -> int:
    # 3×3 kernel, stride 2, padding 1
    return (size - 1) // 2 + 1


def decoder_output_padding(height: int, width: int, /) -> int:
    """Output padding that makes the stride-2 transpose convolution land exactly on H×W."""
    paddings = {
        size - (2 * (downsampled_extent(size) - 1) - 2 + 3) for size in (height, width)
    }
    if len(paddings) != 1:
        raise ConfigurationError(
            f"Frame height and width need equal parity, got {height}×{width}."
        )
    return paddings.pop()


class EncoderNet(Module):
    """Four 3×3 convolutions (first one stride 2) then two dense layers.

    Batch norm follows the second and fourth convolution; the last dense layer
    is linear.
    """

    def __init__(
        self,
        store: ParameterStore,
        prefix: str,
        rng: np.random.Generator,
        cfg: ModelConfig,
        out_features: int,
        /,
    ):
        super().__init__(store, prefix)
        filters = cfg.filters
        self.config = cfg
        self.out_features = out_features

        self.conv1 = self.adopt(
            Conv(store, f"{prefix}.conv1", rng, cfg.input_channels, filters, stride=2)
        )
        self.conv2 = self.adopt(Conv(store, f"{prefix}.conv2", rng, filters, filters))
        self.norm2 = self.adopt(
            BatchNorm(store, f"{prefix}.norm2", filters, **_bn_options(cfg))
        )
        self.conv3 = self.adopt(Conv(store, f"{prefix}.conv3", rng, filters, filters))
        self.conv4 = self.adopt(Conv(store, f"{prefix}.conv4", rng, filters, filters))
        self.norm4 = self.adopt(
            BatchNorm(store, f"{prefix}.norm4", filters, **_bn_options(cfg))
        )

        flat = filters * downsampled_extent(cfg.height) * downsampled_extent(cfg.width)
        self.hidden = self.adopt(
            Dense(store, f"{prefix}.hidden", rng, flat, cfg.encoder_hidden)
        )
        self.output = self.adopt(
            Dense(store, f"{prefix}.output", rng, cfg.encoder_hidden, out_features)
        )

    def __call__(self, x: Tensor, /) -> Tensor:
        h = elu(self.conv1(x))
        h = elu(self.norm2(self.conv2(h)))
        h = elu(self.conv3(h))
        h = elu(self.norm4(self.conv4(h)))
        h = elu(self.hidden(h.reshape(h.shape[0], -1)))
        return self.output(h)


class DecoderNet(Module):
    """A dense layer then four 3×3 transpose convolutions (last one stride 2).

    The output is the mean image of a unit-variance Gaussian.
    """

    def __init__(
        self, store: ParameterStore, prefix: str, rng: np.random.Generator, cfg: ModelConfig, /
    ):
        super().__init__(store, prefix)
        filters = cfg.filters
        self.config = cfg
        height, width = downsampled_extent(cfg.height), downsampled_extent(cfg.width)
        self.seed_shape = (filters, height, width)
        flat = filters * height * width

        self.input = self.adopt(Dense(store, f"{prefix}.input", rng, cfg.latent_dim, flat))
        self.deconv1 = self.adopt(
            ConvTranspose(store, f"{prefix}.deconv1", rng, filters, filters)
        )
        self.deconv2 = self.adopt(
            ConvTranspose(store, f"{prefix}.deconv2", rng, filters, filters)
        )
        self.norm2 = self.adopt(
            BatchNorm(store, f"{prefix}.norm2", filters, **_bn_options(cfg))
        )
        self.deconv3 = self.adopt(
            ConvTranspose(store, f"{prefix}.deconv3", rng, filters, filters)
        )
        self.deconv4 = self.adopt(
            ConvTranspose(
                store,
                f"{prefix}.deconv4",
                rng,
                filters,
                cfg.input_channels,
                stride=2,
                output_padding=decoder_output_padding(cfg.height, cfg.width),
            )
        )
        self.norm4 = self.adopt(
            BatchNorm(store, f"{prefix}.norm4", cfg.input_channels, **_bn_options(cfg))
        )

    def __call__(self, z: Tensor, /) -> Tensor:
        h = elu(self.input(z)).reshape(z.shape[0], *self.seed_shape)
        h = elu(self.deconv1(h))
        h = elu(self.norm2(self.deconv2(h)))
        h = elu(self.deconv3(h))
        return self.norm4(self.deconv4(h))


class ForwardNet(Module):
    """Three dense layers over concat(z, u / torque limit)."""

    def __init__(
        self,
        store: ParameterStore,
        prefix: str,
        rng: np.random.Generator,
        cfg: ModelConfig,
        out_features: int,
        control_scale: float,
        /,
    ):
        super().__init__(store, prefix)
        if control_scale <= 0:
            raise ConfigurationError("The control scale (torque limit) must be positive.")

        self.control_scale = control_scale
        width = cfg.forward_hidden
        self.layer1 = self.adopt(
            Dense(store, f"{prefix}.layer1", rng, cfg.latent_dim + 1, width)
        )
        self.layer2 = self.adopt(Dense(store, f"{prefix}.layer2", rng, width, width))
        self.layer3 = self.adopt(Dense(store, f"{prefix}.layer3", rng, width, out_features))

    def __call__(self, z: Tensor, u: Tensor, /) -> Tensor:
        u = as_tensor(u).reshape(z.shape[0], 1) / self.control_scale
        h = elu(self.layer1(concat([z, u], axis=1)))
        h = elu(self.layer2(h))
        return self.layer3(h)


def _bn_options(cfg: ModelConfig, /) -> dict[str, float]:
    return {"momentum": cfg.bn_momentum, "eps": cfg.bn_eps}
