from __future__ import annotations

from Common import BoolColumn, EnumColumn, FloatColumn, IntColumn, ModelFamily, Row

__all__ = (
    "REPORT_FILE",
    "CORRELATION_FILE",
    "LATENT_FILE",
    "GRID_FILE",
    "EvalRow",
    "CorrelationRow",
    "LatentRow",
    "SweepRow",
    "TrajectoryRow",
)

REPORT_FILE = "report.csv"
CORRELATION_FILE = "correlations.csv"
LATENT_FILE = "latents.csv"
GRID_FILE = "grid.pgm"


class _NoiseLevel(Row):
    columns = {
        "measurement_variance": FloatColumn(),
        "control_variance": FloatColumn(),
    }

    measurement_variance: float
    control_variance: float


class EvalRow(_NoiseLevel):
    """One evaluated (noise level, model) pair."""

    columns = {
        "model": EnumColumn(ModelFamily),
        "dynamics_variance": FloatColumn(),
        "recon_mse": FloatColumn(),
        "recon_psnr": FloatColumn(),
        "noisy_psnr": FloatColumn(),
        "denoising_gain": FloatColumn(),
        "next_mse": FloatColumn(),
        "persistence_mse": FloatColumn(),
        "corr_sin_angle": FloatColumn(),
        "corr_cos_angle": FloatColumn(),
        "corr_velocity": FloatColumn(),
        "encoder_std": FloatColumn(),
        "forward_std": FloatColumn(),
    }

    model: ModelFamily
    dynamics_variance: float
    recon_mse: float
    recon_psnr: float
    noisy_psnr: float
    denoising_gain: float
    next_mse: float
    persistence_mse: float
    corr_sin_angle: float
    corr_cos_angle: float
    corr_velocity: float
    encoder_std: float
    forward_std: float


class CorrelationRow(Row):
    columns = {
        "dimension": IntColumn(),
        "sin_angle": FloatColumn(),
        "cos_angle": FloatColumn(),
        "velocity": FloatColumn(),
        "degenerate": BoolColumn(),
    }

    dimension: int
    sin_angle: float
    cos_angle: float
    velocity: float
    degenerate: bool


class LatentRow(Row):
    columns = {
        "index": IntColumn(),
        "dimension": IntColumn(),
        "mean": FloatColumn(),
        "std": FloatColumn(),
        "angle": FloatColumn(),
        "velocity": FloatColumn(),
    }

    index: int
    dimension: int
    mean: float
    std: float
    angle: float
    velocity: float


class SweepRow(_NoiseLevel):
    columns = {
        "encoder_std": FloatColumn(),
        "forward_std": FloatColumn(),
    }

    encoder_std: float
    forward_std: float


class TrajectoryRow(Row):
    """Mean ± one standard deviation of one latent component at time t + 1."""

    columns = {
        "step": IntColumn(),
        "index": IntColumn(),
        "angle": FloatColumn(),
        "rod_height": FloatColumn(),
        "encoder_mean": FloatColumn(),
        "encoder_std": FloatColumn(),
        "forward_mean": FloatColumn(),
        "forward_std": FloatColumn(),
        "rollout_mean": FloatColumn(),
        "rollout_std": FloatColumn(),
    }

    step: int
    index: int
    angle: float
    rod_height: float
    encoder_mean: float
    encoder_std: float
    forward_mean: float
    forward_std: float
    rollout_mean: float
    rollout_std: float
