from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from Common import DataError, DimensionError

__all__ = (
    "PSNR_CAP",
    "MIN_CORRELATION_SAMPLES",
    "CORRELATION_TARGETS",
    "mse",
    "psnr",
    "denoising_gain",
    "LatentCorrelation",
    "latent_correlation",
)

PSNR_CAP = 100.0
MIN_CORRELATION_SAMPLES = 30
CORRELATION_TARGETS = ("sin_angle", "cos_angle", "velocity")


def _check_images(estimate: np.ndarray, reference: np.ndarray, op: str, /) -> None:
    if estimate.shape != reference.shape or estimate.ndim < 2:
        raise DimensionError(op, estimate.shape, reference.shape)


def mse(estimate: np.ndarray, reference: np.ndarray, /) -> float:
    _check_images(estimate, reference, "mse")
    difference = np.asarray(estimate, dtype=np.float64) - reference
    return float(np.mean(difference * difference))


def psnr(estimate: np.ndarray, reference: np.ndarray, /) -> float:
    """Mean per-image PSNR in dB for a peak value of 1, capped at `PSNR_CAP`."""
    _check_images(estimate, reference, "psnr")
    difference = np.asarray(estimate, dtype=np.float64) - reference
    errors = np.mean(difference.reshape(len(difference), -1) ** 2, axis=1)

    with np.errstate(divide="ignore"):
        values = -10.0 * np.log10(errors)
    return float(np.mean(np.minimum(values, PSNR_CAP)))


def denoising_gain(
    reconstruction: np.ndarray, noisy: np.ndarray, clean: np.ndarray, /
) -> float:
    return psnr(reconstruction, clean) - psnr(noisy, clean)


@dataclass(frozen=True, eq=False)
class LatentCorrelation:
    values: np.ndarray  # [|z|, 3] Pearson correlation per latent dimension and target
    degenerate: np.ndarray  # [|z|] constant latent dimensions, reported as 0

    @property
    def latent_dim(self) -> int:
        return len(self.values)

    def column(self, target: str, /) -> np.ndarray:
        return self.values[:, CORRELATION_TARGETS.index(target)]

    def best(self, target: str, /) -> float:
        return float(np.max(np.abs(self.column(target))))

    def best_dimension(self, target: str, /) -> int:
        return int(np.argmax(np.abs(self.column(target))))


def _targets(states: np.ndarray, /) -> np.ndarray:
    angle, velocity = states[:, 0], states[:, 1]
    return np.stack([np.sin(angle), np.cos(angle), velocity], axis=1)


def latent_correlation(means: np.ndarray, states: np.ndarray, /) -> LatentCorrelation:
    """Correlates each latent mean dimension with sin φ, cos φ and φ̇.

    `states` holds (angle, velocity) rows and is only ever read here, never fed
    to a model.
    """
    means = np.asarray(means, dtype=np.float64)
    states = np.asarray(states, dtype=np.float64)

    if means.ndim != 2 or states.shape != (len(means), 2):
        raise DimensionError("latent_correlation", means.shape, states.shape)
    if len(means) < MIN_CORRELATION_SAMPLES:
        raise DataError(
            f"Latent correlations need at least {MIN_CORRELATION_SAMPLES} samples, "
            f"got {len(means)}."
        )

    targets = _targets(states)
    degenerate = np.ptp(means, axis=0) == 0
    flat_targets = np.ptp(targets, axis=0) == 0

    centred_means = means - means.mean(axis=0)
    centred_targets = targets - targets.mean(axis=0)
    covariance = centred_means.T @ centred_targets
    scale = np.outer(
        np.sqrt(np.sum(centred_means**2, axis=0)), np.sqrt(np.sum(centred_targets**2, axis=0))
    )

    valid = ~degenerate[:, None] & ~flat_targets[None, :]
    values = np.zeros_like(covariance)
    np.divide(covariance, scale, out=values, where=valid)
    np.clip(values, -1.0, 1.0, out=values)

    return LatentCorrelation(values, degenerate)
