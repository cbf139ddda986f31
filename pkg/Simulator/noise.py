from __future__ import annotations

from math import sqrt

import numpy as np

from Common import ConfigurationError

__all__ = ("add_measurement_noise", "add_control_noise")


def _check_variance(variance: float, /) -> float:
    if variance < 0:
        raise ConfigurationError(f"Noise variance must be non-negative, got {variance}.")
    return sqrt(variance)


def add_measurement_noise(
    frames: np.ndarray, variance: float, rng: np.random.Generator, /
) -> np.ndarray:
    """Adds i.i.d. N(0, variance) to every pixel; the result is not clamped to [0, 1]."""
    std = _check_variance(variance)
    if std == 0:
        return frames.copy()
    return (frames + std * rng.standard_normal(frames.shape)).astype(frames.dtype)


def add_control_noise(torque, variance: float, rng: np.random.Generator, /):
    std = _check_variance(variance)
    if std == 0:
        return np.copy(torque) if isinstance(torque, np.ndarray) else torque
    if isinstance(torque, np.ndarray):
        return (torque + std * rng.standard_normal(torque.shape)).astype(torque.dtype)
    return torque + std * rng.standard_normal()
