from __future__ import annotations

from functools import cache
from math import cos, sin
from typing import TYPE_CHECKING

import numpy as np

from Common import ConfigurationError

if TYPE_CHECKING:
    from .pendulum import PendulumState

__all__ = ("ROD_FRACTION", "render", "stack_frames")

ROD_FRACTION = 0.4


@cache
def _pixel_centres(height: int, width: int, /) -> tuple[np.ndarray, np.ndarray]:
    rows, columns = np.mgrid[0:height, 0:width]
    return rows + 0.5, columns + 0.5


def render(state: PendulumState, height: int, width: int, /) -> np.ndarray:
    """Anti-aliased rod of length 0.4·min(H, W) pivoting at the image centre.

    φ = 0 points up. A pixel's intensity is clip(1.5 − d, 0, 1) for distance d
    from its centre to the rod axis segment.
    """
    if min(height, width) < 16:
        raise ConfigurationError(f"Frames must be at least 16×16, got {height}×{width}.")

    ys, xs = _pixel_centres(height, width)
    pivot_x, pivot_y = width / 2.0, height / 2.0
    length = ROD_FRACTION * min(height, width)

    dx, dy = length * sin(state.angle), -length * cos(state.angle)
    t = ((xs - pivot_x) * dx + (ys - pivot_y) * dy) / (length * length)
    t = np.clip(t, 0.0, 1.0)

    distance = np.hypot(xs - pivot_x - t * dx, ys - pivot_y - t * dy)
    return np.clip(1.5 - distance, 0.0, 1.0)


def stack_frames(previous: np.ndarray, current: np.ndarray, channels: int, /) -> np.ndarray:
    """Two consecutive frames as one [2C, H, W] measurement, each replicated C times."""
    return np.repeat(np.stack([previous, current]), channels, axis=0).astype(np.float32)
