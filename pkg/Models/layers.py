from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np

from Autodiff import (
    ParameterGroup,
    batch_norm,
    conv2d,
    conv_transpose2d,
    linear,
)

from .module import Module, uniform_fan_in

if TYPE_CHECKING:
    from Autodiff import ParameterStore, Tensor

__all__ = ("Dense", "Conv", "ConvTranspose", "BatchNorm")


class Dense(Module):
    def __init__(
        self,
        store: ParameterStore,
        prefix: str,
        rng: np.random.Generator,
        in_features: int,
        out_features: int,
        /,
    ):
        super().__init__(store, prefix)
        self.in_features = in_features
        self.out_features = out_features
        self.weight = self.parameter(
            "weight", uniform_fan_in(rng, (out_features, in_features), in_features)
        )
        self.bias = self.parameter("bias", uniform_fan_in(rng, (out_features,), in_features))

    def __call__(self, x: Tensor, /) -> Tensor:
        return linear(x, self.weight, self.bias)


class Conv(Module):
    def __init__(
        self,
        store: ParameterStore,
        prefix: str,
        rng: np.random.Generator,
        in_channels: int,
        out_channels: int,
        /,
        *,
        kernel: int = 3,
        stride: int = 1,
        padding: int = 1,
    ):
        super().__init__(store, prefix)
        fan_in = in_channels * kernel * kernel
        self.stride = stride
        self.padding = padding
        self.weight = self.parameter(
            "weight", uniform_fan_in(rng, (out_channels, in_channels, kernel, kernel), fan_in)
        )
        self.bias = self.parameter("bias", uniform_fan_in(rng, (out_channels,), fan_in))

    def __call__(self, x: Tensor, /) -> Tensor:
        return conv2d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)


class ConvTranspose(Module):
    def __init__(
        self,
        store: ParameterStore,
        prefix: str,
        rng: np.random.Generator,
        in_channels: int,
        out_channels: int,
        /,
        *,
        kernel: int = 3,
        stride: int = 1,
        padding: int = 1,
        output_padding: int = 0,
    ):
        super().__init__(store, prefix)
        fan_in = out_channels * kernel * kernel
        self.stride = stride
        self.padding = padding
        self.output_padding = output_padding
        self.weight = self.parameter(
            "weight", uniform_fan_in(rng, (in_channels, out_channels, kernel, kernel), fan_in)
        )
        self.bias = self.parameter("bias", uniform_fan_in(rng, (out_channels,), fan_in))

    def __call__(self, x: Tensor, /) -> Tensor:
        return conv_transpose2d(
            x,
            self.weight,
            self.bias,
            stride=self.stride,
            padding=self.padding,
            output_padding=self.output_padding,
        )


class BatchNorm(Module):
    def __init__(
        self,
        store: ParameterStore,
        prefix: str,
        channels: int,
        /,
        *,
        momentum: float = 0.1,
        eps: float = 1e-5,
    ):
        super().__init__(store, prefix)
        self.momentum = momentum
        self.eps = eps
        self.scale = self.parameter("scale", np.ones(channels))
        self.shift = self.parameter("shift", np.zeros(channels))
        buffer = ParameterGroup.Buffer
        self.running_mean = self.parameter("running_mean", np.zeros(channels), buffer)
        self.running_var = self.parameter("running_var", np.ones(channels), buffer)

    def __call__(self, x: Tensor, /) -> Tensor:
        return batch_norm(
            x,
            self.scale,
            self.shift,
            self.running_mean,
            self.running_var,
            training=self.training,
            momentum=self.momentum,
            eps=self.eps,
        )
