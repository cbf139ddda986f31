from __future__ import annotations

from dataclasses import dataclass
from logging import DEBUG, INFO
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from Autodiff import Tape
from Common import ConfigMismatchError, DataError, append_row, derive_rng, log
from Models import build_model, save_checkpoint
from Simulator import add_control_noise, add_measurement_noise

from .losses import Batch, total_loss
from .optimizer import AdamW
from .rows import EpochRow

if TYPE_CHECKING:
    from collections.abc import Iterator

    from Common import ModelConfig, NoiseConfig, TrainConfig
    from Models import LatentModel
    from Simulator import Dataset

__all__ = (
    "METRICS_FILE",
    "CHECKPOINT_FILE",
    "make_batch",
    "Trainer",
    "TrainResult",
    "train",
)

METRICS_FILE = "metrics.csv"
CHECKPOINT_FILE = "model.ldkc"

# Independent random streams derived from the training seed
_INIT_STREAM, _SHUFFLE_STREAM, _STEP_STREAM = 0, 1, 2


def make_batch(
    dataset: Dataset, indices: np.ndarray, noise: NoiseConfig, rng: np.random.Generator, /
) -> Batch:
    """Corrupts the selected clean transitions with fresh measurement and control noise."""
    variance = noise.measurement_variance
    frames = add_measurement_noise(dataset.frames[indices], variance, rng)
    next_frames = add_measurement_noise(dataset.next_frames[indices], variance, rng)
    controls = add_control_noise(
        dataset.controls[indices].astype(np.float64), noise.control_variance, rng
    )
    return Batch.create(frames, controls, next_frames)


class Trainer:
    def __init__(
        self,
        model: LatentModel,
        dataset: Dataset,
        train_cfg: TrainConfig,
        noise_cfg: NoiseConfig,
        directory: Path,
        /,
    ):
        if dataset.header.measurement_shape != model.config.measurement_shape:
            raise ConfigMismatchError(
                "dataset",
                [
                    f"measurement shape {dataset.header.measurement_shape}, "
                    f"model expects {model.config.measurement_shape}"
                ],
            )
        if len(dataset) < 2:
            raise DataError(f"Training needs at least 2 transitions, got {len(dataset)}.")

        self.model = model
        self.dataset = dataset
        self.config = train_cfg
        self.noise = noise_cfg
        self.directory = Path(directory)
        self.optimizer = AdamW(
            model.store,
            lr_nn=train_cfg.lr_nn,
            lr_gp=train_cfg.lr_gp,
            weight_decay=train_cfg.weight_decay,
        )

    @property
    def metrics_path(self) -> Path:
        return self.directory / METRICS_FILE

    @property
    def checkpoint_path(self) -> Path:
        return self.directory / CHECKPOINT_FILE

    def batches(self, epoch: int, /) -> Iterator[np.ndarray]:
        # Batch norm needs two samples, so a trailing singleton is dropped
        rng = derive_rng(self.config.seed, _SHUFFLE_STREAM, epoch)
        order = rng.permutation(len(self.dataset))
        size = self.config.batch_size

        for start in range(0, len(order), size):
            indices = order[start : start + size]
            if len(indices) >= 2:
                yield np.sort(indices)

    def step(self, indices: np.ndarray, rng: np.random.Generator, /) -> dict[str, float]:
        batch = make_batch(self.dataset, indices, self.noise, rng)
        epsilon = rng.standard_normal((batch.size, self.model.latent_dim))

        self.model.store.zero_grad()
        with Tape() as tape:
            losses = total_loss(batch, self.model, self.config, epsilon=epsilon)
        grads = tape.backward(losses.total)
        self.optimizer.step(grads)

        return losses.values()

    def run_epoch(self, epoch: int, /) -> EpochRow:
        self.model.train()
        totals: dict[str, float] = {}
        steps = 0

        for step, indices in enumerate(self.batches(epoch)):
            rng = derive_rng(self.config.seed, _STEP_STREAM, epoch, step)
            for key, value in self.step(indices, rng).items():
                totals[key] = totals.get(key, 0.0) + value
            steps += 1
            log(f"Epoch {epoch} step {step}: total {totals['total'] / steps:.6f}.", DEBUG)

        averages = {key: value / max(steps, 1) for key, value in totals.items()}
        return EpochRow.new(epoch=epoch, **averages)

    def run(self) -> list[EpochRow]:
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
            self.metrics_path.unlink(missing_ok=True)
        except OSError as error:
            raise DataError(f"Cannot prepare {self.directory}: {error.strerror}.") from error

        rows = []
        for epoch in range(1, self.config.epochs + 1):
            row = self.run_epoch(epoch)
            rows.append(row)

            append_row(self.metrics_path, row)
            save_checkpoint(self.model, self.checkpoint_path)
            log(
                f"Epoch {epoch}/{self.config.epochs}: total {row.total:.6f} "
                f"(recon {row.recon_loss:.6f}, dyn {row.dyn_loss:.6f}).",
                INFO,
            )

        self.model.eval()
        return rows


@dataclass(frozen=True, eq=False)
class TrainResult:
    model: LatentModel
    rows: list[EpochRow]
    checkpoint: Path
    metrics: Path


def train(
    dataset: Dataset,
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    noise_cfg: NoiseConfig,
    control_scale: float,
    directory: Path,
    /,
) -> TrainResult:
    """Builds a fresh model from the training seed and fits it to `dataset`."""
    model = build_model(model_cfg, control_scale, derive_rng(train_cfg.seed, _INIT_STREAM))
    log(f"Training {model!r} on {len(dataset)} transitions.", INFO)

    trainer = Trainer(model, dataset, train_cfg, noise_cfg, directory)
    rows = trainer.run()
    return TrainResult(model, rows, trainer.checkpoint_path, trainer.metrics_path)
