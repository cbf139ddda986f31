from __future__ import annotations

from dataclasses import dataclass
from logging import DEBUG
from typing import TYPE_CHECKING

import numpy as np

from Autodiff import Tensor
from Common import Averaging, UsageError, derive_rng, log
from Simulator import add_control_noise, add_measurement_noise

from .analysis import denoising_gain, latent_correlation, mse, psnr
from .images import current_frame, image_grid
from .report import CorrelationRow, EvalRow, LatentRow, SweepRow, TrajectoryRow

if TYPE_CHECKING:
    from collections.abc import Iterator

    from Common import NoiseConfig
    from Kernels import DiagonalGaussian
    from Models import LatentModel
    from Simulator import Dataset

    from .analysis import LatentCorrelation

__all__ = (
    "Evaluation",
    "corrupt",
    "encode_means",
    "evaluate",
    "summarise",
    "correlation_rows",
    "latent_rows",
    "evaluation_grid",
    "uq_sweep",
    "default_component",
    "trajectory",
)

# Measurement/control noise and latent sampling draw from separate streams, so
# two models evaluated with one seed see identical corrupted inputs
_NOISE_STREAM, _SAMPLE_STREAM = 0, 1


@dataclass(frozen=True, eq=False)
class Evaluation:
    noise: NoiseConfig
    noisy: np.ndarray  # [N, 2C, H, W]
    reconstruction: np.ndarray  # decoded z_t
    prediction: np.ndarray  # decoded one-step prediction of z_{t+1}
    encoder_mean: np.ndarray  # [N, |z|]
    encoder_std: np.ndarray
    forward_mean: np.ndarray  # p(z_{t+1} | mean of z_t, ũ_t)
    forward_std: np.ndarray


def corrupt(
    dataset: Dataset, noise: NoiseConfig, seed: int, /, *, indices: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Noisy (frames, controls, next frames) for the selected transitions."""
    if indices is None:
        indices = np.arange(len(dataset))

    rng = derive_rng(seed, _NOISE_STREAM)
    variance = noise.measurement_variance
    frames = add_measurement_noise(dataset.frames[indices], variance, rng)
    controls = add_control_noise(
        dataset.controls[indices].astype(np.float64), noise.control_variance, rng
    )
    next_frames = add_measurement_noise(dataset.next_frames[indices], variance, rng)
    return frames, controls, next_frames


def _batches(
    model: LatentModel, frames: np.ndarray, controls: np.ndarray, batch_size: int, /
) -> Iterator[tuple[slice, DiagonalGaussian, DiagonalGaussian]]:
    for start in range(0, len(frames), batch_size):
        window = slice(start, start + batch_size)
        posterior = model.encode(Tensor(frames[window]))
        forward = model.predict_next(posterior.mean, controls[window])
        yield window, posterior, forward


def encode_means(model: LatentModel, frames: np.ndarray, batch_size: int, /) -> np.ndarray:
    means = [
        model.encode(Tensor(frames[start : start + batch_size])).mean.numpy()
        for start in range(0, len(frames), batch_size)
    ]
    return np.concatenate(means)


def _average_decode(
    model: LatentModel, latents: list[Tensor], average: Averaging, /
) -> np.ndarray:
    if average is Averaging.Latent:
        mean = np.mean([z.data for z in latents], axis=0)
        return model.decode(Tensor(mean)).numpy()
    return np.mean([model.decode(z).data for z in latents], axis=0)


def evaluate(
    model: LatentModel,
    dataset: Dataset,
    noise: NoiseConfig,
    /,
    *,
    samples: int,
    average: Averaging,
    batch_size: int,
    seed: int,
) -> Evaluation:
    """Runs the test set through a model in eval mode without recording gradients.

    Each reconstruction averages `samples` reparametrised draws, either in
    latent space before decoding or over the decoded images.
    """
    if samples < 1 or batch_size < 1:
        raise UsageError("Evaluation needs at least one sample and one item per batch.")

    model.eval()
    noisy, controls, _ = corrupt(dataset, noise, seed)
    rng = derive_rng(seed, _SAMPLE_STREAM)

    parts: dict[str, list[np.ndarray]] = {}
    for window, posterior, forward in _batches(model, noisy, controls, batch_size):
        current = [model.sample_latent(posterior, rng) for _ in range(samples)]
        following = [
            model.sample_latent(model.predict_next(z, controls[window]), rng) for z in current
        ]

        values = {
            "reconstruction": _average_decode(model, current, average),
            "prediction": _average_decode(model, following, average),
            "encoder_mean": posterior.mean.numpy(),
            "encoder_std": posterior.std.numpy(),
            "forward_mean": forward.mean.numpy(),
            "forward_std": forward.std.numpy(),
        }
        for key, value in values.items():
            parts.setdefault(key, []).append(value)
        log(f"Evaluated the batch starting at transition {window.start}.", DEBUG)

    merged = {key: np.concatenate(value) for key, value in parts.items()}
    return Evaluation(noise=noise, noisy=noisy, **merged)


def summarise(
    model: LatentModel,
    dataset: Dataset,
    evaluation: Evaluation,
    correlation: LatentCorrelation,
    /,
) -> EvalRow:
    clean, following = dataset.frames, dataset.next_frames
    noise = evaluation.noise

    return EvalRow.new(
        measurement_variance=noise.measurement_variance,
        control_variance=noise.control_variance,
        model=model.family,
        dynamics_variance=noise.dynamics_variance,
        recon_mse=mse(evaluation.reconstruction, clean),
        recon_psnr=psnr(evaluation.reconstruction, clean),
        noisy_psnr=psnr(evaluation.noisy, clean),
        denoising_gain=denoising_gain(evaluation.reconstruction, evaluation.noisy, clean),
        next_mse=mse(evaluation.prediction, following),
        persistence_mse=mse(evaluation.reconstruction, following),
        corr_sin_angle=correlation.best("sin_angle"),
        corr_cos_angle=correlation.best("cos_angle"),
        corr_velocity=correlation.best("velocity"),
        encoder_std=float(np.mean(evaluation.encoder_std)),
        forward_std=float(np.mean(evaluation.forward_std)),
    )


def correlation_rows(correlation: LatentCorrelation, /) -> list[CorrelationRow]:
    return [
        CorrelationRow.new(
            dimension=dimension,
            sin_angle=float(values[0]),
            cos_angle=float(values[1]),
            velocity=float(values[2]),
            degenerate=bool(correlation.degenerate[dimension]),
        )
        for dimension, values in enumerate(correlation.values)
    ]


def latent_rows(dataset: Dataset, evaluation: Evaluation, /) -> list[LatentRow]:
    """Encoder means and stds in long format, one row per transition and dimension."""
    states = np.asarray(dataset.states, dtype=np.float64)
    means, stds = evaluation.encoder_mean, evaluation.encoder_std

    return [
        LatentRow.new(
            index=index,
            dimension=dimension,
            mean=float(means[index, dimension]),
            std=float(stds[index, dimension]),
            angle=float(states[index, 0]),
            velocity=float(states[index, 1]),
        )
        for index in range(len(means))
        for dimension in range(means.shape[1])
    ]


def evaluation_grid(dataset: Dataset, evaluation: Evaluation, rows: int, /) -> np.ndarray:
    """clean | noisy | reconstruction | next-step reconstruction for the first `rows` items."""
    count = min(rows, len(dataset))
    channels = dataset.header.channels
    stacks = (
        dataset.frames[:count],
        evaluation.noisy[:count],
        evaluation.reconstruction[:count],
        evaluation.prediction[:count],
    )
    return image_grid([current_frame(stack, channels) for stack in stacks])


def uq_sweep(
    model: LatentModel,
    dataset: Dataset,
    levels: list[NoiseConfig],
    /,
    *,
    batch_size: int,
    seed: int,
) -> list[SweepRow]:
    """Mean predictive standard deviation of z_t and z_{t+1} per noise level."""
    model.eval()
    rows = []

    for noise in levels:
        noisy, controls, _ = corrupt(dataset, noise, seed)
        encoder, forward = [], []
        for _, posterior, prediction in _batches(model, noisy, controls, batch_size):
            encoder.append(posterior.std.numpy())
            forward.append(prediction.std.numpy())

        rows.append(
            SweepRow.new(
                measurement_variance=noise.measurement_variance,
                control_variance=noise.control_variance,
                encoder_std=float(np.mean(np.concatenate(encoder))),
                forward_std=float(np.mean(np.concatenate(forward))),
            )
        )
        log(f"Swept σ_x² = {noise.measurement_variance}, σ_u² = {noise.control_variance}.")

    return rows


def default_component(model: LatentModel, dataset: Dataset, /, *, batch_size: int) -> int:
    """The latent dimension whose clean-input mean tracks cos φ most closely."""
    model.eval()
    means = encode_means(model, dataset.frames, batch_size)
    return latent_correlation(means, dataset.states).best_dimension("cos_angle")


def trajectory(
    model: LatentModel,
    dataset: Dataset,
    noise: NoiseConfig,
    /,
    *,
    start: int,
    steps: int,
    component: int,
    seed: int,
) -> list[TrajectoryRow]:
    """Uncertainty bands of one latent component along a single episode.

    Row k describes time t + 1 for transition `start + k`: the encoder on the
    noisy next measurement, the one-step forward model from the encoded z_t,
    and the open-loop rollout started from the encoded z at `start`.
    """
    if not 0 <= start < len(dataset) or steps < 1:
        raise UsageError(f"Trajectory start {start} and steps {steps} are out of range.")
    if not 0 <= component < model.latent_dim:
        raise UsageError(f"Latent component {component} is out of range.")

    model.eval()
    stop = min(start + steps, dataset.episode_slice(start).stop)
    indices = np.arange(start, stop)
    frames, controls, next_frames = corrupt(dataset, noise, seed, indices=indices)

    current = model.encode(Tensor(frames))
    following = model.encode(Tensor(next_frames))
    forward = model.predict_next(current.mean, controls)
    rollout = model.rollout(current.mean[:1], controls)

    states = np.asarray(dataset.next_states[indices], dtype=np.float64)
    length = dataset.header.params.length

    rows = []
    for k, index in enumerate(indices):
        angle = float(states[k, 0])
        rows.append(
            TrajectoryRow.new(
                step=k,
                index=int(index),
                angle=angle,
                rod_height=length * float(np.cos(angle)),
                encoder_mean=float(following.mean.data[k, component]),
                encoder_std=float(following.std.data[k, component]),
                forward_mean=float(forward.mean.data[k, component]),
                forward_std=float(forward.std.data[k, component]),
                rollout_mean=float(rollout[k].mean.data[0, component]),
                rollout_std=float(rollout[k].std.data[0, component]),
            )
        )

    return rows
