from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np

from Common import DimensionError, atomic_write, log

if TYPE_CHECKING:
    from collections.abc import Sequence
    from pathlib import Path

__all__ = ("GRID_GAP", "current_frame", "image_grid", "encode_pgm", "write_pgm")

GRID_GAP = 1


def current_frame(measurements: np.ndarray, channels: int, /) -> np.ndarray:
    """First channel of the newer frame in each stacked [2C, H, W] measurement."""
    return measurements[:, channels]


def image_grid(columns: Sequence[np.ndarray], /, *, gap: int = GRID_GAP) -> np.ndarray:
    """Tiles equally shaped [R, H, W] stacks side by side, one image per cell."""
    first = columns[0]
    if first.ndim != 3 or any(column.shape != first.shape for column in columns):
        raise DimensionError("image_grid", *(column.shape for column in columns))

    rows, height, width = first.shape
    grid = np.ones(
        (rows * height + (rows - 1) * gap, len(columns) * width + (len(columns) - 1) * gap)
    )

    for j, column in enumerate(columns):
        for i, image in enumerate(column):
            top, left = i * (height + gap), j * (width + gap)
            grid[top : top + height, left : left + width] = image

    return grid


def encode_pgm(image: np.ndarray, /) -> bytes:
    """Binary (P5) graymap with maxval 255; values are clipped to [0, 1] first."""
    if image.ndim != 2:
        raise DimensionError("encode_pgm", image.shape)

    height, width = image.shape
    pixels = np.rint(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
    return f"P5\n{width} {height}\n255\n".encode("ascii") + pixels.tobytes()


def write_pgm(path: Path, image: np.ndarray, /) -> None:
    data = encode_pgm(image)
    atomic_write(path, lambda target: target.write_bytes(data))
    log(f"Wrote {image.shape[1]}×{image.shape[0]} image grid to {path}.")
