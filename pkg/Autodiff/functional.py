from __future__ import annotations

import numpy as np

from Common import ConfigurationError, DimensionError

from .ops import add, matmul, transpose
from .tape import OpKind
from .tensor import Function, Tensor

__all__ = (
    "conv2d",
    "conv_transpose2d",
    "linear",
    "batch_norm",
)


def _conv_extent(size: int, kernel: int, stride: int, padding: int, /) -> int:
    return (size + 2 * padding - kernel) // stride + 1


class Conv2d(Function):
    kind = OpKind.Conv2d

    def forward(self, x, weight, *, stride: int, padding: int):
        batch, channels, height, width = x.shape
        out_channels, in_channels, kernel, kernel_w = weight.shape

        if in_channels != channels or kernel != kernel_w:
            raise DimensionError(self.kind, x.shape, weight.shape)

        if stride < 1:
            raise ConfigurationError(f"conv2d stride must be at least 1, got {stride}.")

        out_h = _conv_extent(height, kernel, stride, padding)
        out_w = _conv_extent(width, kernel, stride, padding)
        if out_h <= 0 or out_w <= 0:
            raise ConfigurationError(
                f"conv2d output extent {out_h}×{out_w} is not positive "
                f"(input {height}×{width}, stride {stride}, padding {padding})."
            )

        padded = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))

        # im2col: one strided slice per kernel offset
        cols = np.empty((batch, channels, kernel, kernel, out_h, out_w))
        for i in range(kernel):
            for j in range(kernel):
                cols[:, :, i, j] = padded[
                    :, :, i : i + stride * out_h : stride, j : j + stride * out_w : stride
                ]

        self.cols, self.weight = cols, weight
        self.padded_shape = padded.shape
        self.stride, self.padding = stride, padding

        out = np.tensordot(cols, weight, axes=([1, 2, 3], [1, 2, 3]))
        return out.transpose(0, 3, 1, 2)

    def backward(self, grad, /):
        cols, weight, stride = self.cols, self.weight, self.stride
        kernel = weight.shape[2]
        out_h, out_w = grad.shape[2:]

        grad_weight = np.tensordot(grad, cols, axes=([0, 2, 3], [0, 4, 5]))
        grad_cols = np.tensordot(weight, grad, axes=([0], [1])).transpose(3, 0, 1, 2, 4, 5)

        # col2im
        grad_padded = np.zeros(self.padded_shape)
        for i in range(kernel):
            for j in range(kernel):
                grad_padded[
                    :, :, i : i + stride * out_h : stride, j : j + stride * out_w : stride
                ] += grad_cols[:, :, i, j]

        p = self.padding
        height, width = self.padded_shape[2] - 2 * p, self.padded_shape[3] - 2 * p
        return grad_padded[:, :, p : p + height, p : p + width], grad_weight


class ConvTranspose2d(Function):
    kind = OpKind.ConvTranspose2d

    def forward(self, x, weight, *, stride: int, padding: int, output_padding: int):
        batch, channels, height, width = x.shape
        in_channels, out_channels, kernel, kernel_w = weight.shape

        if in_channels != channels or kernel != kernel_w:
            raise DimensionError(self.kind, x.shape, weight.shape)
        if stride < 1 or not 0 <= output_padding < stride:
            raise ConfigurationError(
                f"conv_transpose2d needs stride ≥ 1 and 0 ≤ output_padding < stride, "
                f"got stride {stride} and output_padding {output_padding}."
            )

        out_h = (height - 1) * stride - 2 * padding + kernel + output_padding
        out_w = (width - 1) * stride - 2 * padding + kernel + output_padding
        if out_h <= 0 or out_w <= 0:
            raise ConfigurationError(
                f"conv_transpose2d output extent {out_h}×{out_w} is not positive."
            )

        cols = np.tensordot(weight, x, axes=([0], [1])).transpose(3, 0, 1, 2, 4, 5)

        full_h = (height - 1) * stride + kernel + output_padding
        full_w = (width - 1) * stride + kernel + output_padding
        full = np.zeros((batch, out_channels, full_h, full_w))
        for i in range(kernel):
            for j in range(kernel):
                rows = slice(i, i + stride * height, stride)
                columns = slice(j, j + stride * width, stride)
                full[:, :, rows, columns] += cols[:, :, i, j]

        self.x, self.weight = x, weight
        self.full_shape = full.shape
        self.stride, self.padding = stride, padding

        return full[:, :, padding : padding + out_h, padding : padding + out_w]

    def backward(self, grad, /):
        x, weight, stride, p = self.x, self.weight, self.stride, self.padding
        kernel = weight.shape[2]
        height, width = x.shape[2:]
        out_h, out_w = grad.shape[2:]

        grad_full = np.zeros(self.full_shape)
        grad_full[:, :, p : p + out_h, p : p + out_w] = grad

        grad_cols = np.empty((x.shape[0], weight.shape[1], kernel, kernel, height, width))
        for i in range(kernel):
            for j in range(kernel):
                grad_cols[:, :, i, j] = grad_full[
                    :, :, i : i + stride * height : stride, j : j + stride * width : stride
                ]

        grad_x = np.tensordot(grad_cols, weight, axes=([1, 2, 3], [1, 2, 3]))
        grad_x = grad_x.transpose(0, 3, 1, 2)
        grad_weight = np.tensordot(x, grad_cols, axes=([0, 2, 3], [0, 4, 5]))
        return grad_x, grad_weight


def _batched(x: Tensor, /) -> tuple[Tensor, bool]:
    if x.ndim == 3:
        return x.reshape(1, *x.shape), True
    if x.ndim != 4:
        raise DimensionError("conv", x.shape)
    return x, False


def _add_channel_bias(out: Tensor, bias: Tensor | None, /) -> Tensor:
    if bias is None:
        return out
    return add(out, bias.reshape(1, -1, 1, 1))


def conv2d(
    x: Tensor,
    weight: Tensor,
    bias: Tensor | None = None,
    /,
    *,
    stride: int = 1,
    padding: int = 0,
) -> Tensor:
    """Cross-correlation of `x` ([B, C_in, H, W] or [C_in, H, W]) with `weight`.

    `weight` is [C_out, C_in, k, k].

    Output extent per axis is floor((H + 2·padding − k) / stride) + 1.
    """
    batched, squeeze = _batched(x)
    out = _add_channel_bias(Conv2d.apply(batched, weight, stride=stride, padding=padding), bias)
    return out.reshape(*out.shape[1:]) if squeeze else out


def conv_transpose2d(
    x: Tensor,
    weight: Tensor,
    bias: Tensor | None = None,
    /,
    *,
    stride: int = 1,
    padding: int = 0,
    output_padding: int = 0,
) -> Tensor:
    """Adjoint of `conv2d`; `weight` is [C_in, C_out, k, k].

    Output extent per axis is (H − 1)·stride − 2·padding + k + output_padding.
    """
    batched, squeeze = _batched(x)
    out = ConvTranspose2d.apply(
        batched, weight, stride=stride, padding=padding, output_padding=output_padding
    )
    out = _add_channel_bias(out, bias)
    return out.reshape(*out.shape[1:]) if squeeze else out


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None, /) -> Tensor:
    out = matmul(x, transpose(weight))
    return out if bias is None else add(out, bias)


def batch_norm(
    x: Tensor,
    scale: Tensor,
    shift: Tensor,
    running_mean: Tensor,
    running_var: Tensor,
    /,
    *,
    training: bool,
    momentum: float = 0.1,
    eps: float = 1e-5,
) -> Tensor:
    """Per-channel normalisation of [B, C] or [B, C, H, W] inputs.

    In training mode the batch statistics are used and the running buffers are
    updated in place (unbiased variance); in eval mode the running buffers are
    used in place of batch statistics.
    """
    if x.ndim == 2:
        axes, view = (0,), (1, -1)
    elif x.ndim == 4:
        axes, view = (0, 2, 3), (1, -1, 1, 1)
    else:
        raise DimensionError("batch_norm", x.shape)

    if training:
        if x.shape[0] < 2:
            raise ConfigurationError("batch_norm in training mode needs a batch of at least 2.")

        count = x.size // x.shape[1]
        mean = x.mean(axis=axes, keepdims=True)
        centred = x - mean
        var = centred.square().mean(axis=axes, keepdims=True)

        batch_mean = mean.data.reshape(-1)
        batch_var = var.data.reshape(-1) * count / (count - 1)
        running_mean.data *= 1.0 - momentum
        running_mean.data += momentum * batch_mean
        running_var.data *= 1.0 - momentum
        running_var.data += momentum * batch_var
    else:
        centred = x - running_mean.detach().reshape(*view)
        var = running_var.detach().reshape(*view)

    normalised = centred / (var + eps).sqrt()
    return normalised * scale.reshape(*view) + shift.reshape(*view)
