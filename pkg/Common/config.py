from __future__ import annotations

from dataclasses import asdict, dataclass
from enum import StrEnum
from logging import getLevelNamesMapping
from tomllib import TOMLDecodeError, load
from typing import TYPE_CHECKING

from dacite import Config, DaciteError, from_dict

from .errors import ConfigurationError
from .utils import deep_merge, root_dir

if TYPE_CHECKING:
    from pathlib import Path
    from typing import Any

    Json = dict[str, Any]

__all__ = (
    "ModelFamily",
    "Averaging",
    "SimulatorConfig",
    "NoiseConfig",
    "ModelConfig",
    "TrainConfig",
    "EvalConfig",
    "LoggingConfig",
    "GlobalConfig",
    "read_toml",
    "build_config",
    "load_config",
    "config_data",
    "config",
)


class ModelFamily(StrEnum):
    SVDKL = "svdkl"
    VAE = "vae"


class Averaging(StrEnum):
    Latent = "latent"
    Image = "image"


def _require(condition: bool, message: str, /) -> None:
    if not condition:
        raise ConfigurationError(message)


@dataclass(kw_only=True, frozen=True)
class SimulatorConfig:
    mass: float
    length: float
    gravity: float
    dt: float
    torque_limit: float
    max_speed: float
    height: int
    width: int
    channels: int
    episode_length: int
    workers: int

    def __post_init__(self):
        for name in ("mass", "length", "gravity", "dt", "max_speed"):
            _require(getattr(self, name) > 0, f"simulator.{name} must be positive.")
        _require(self.torque_limit >= 0, "simulator.torque_limit must be non-negative.")
        _require(min(self.height, self.width) >= 16, "Rendered frames must be at least 16×16.")
        _require(self.channels >= 1, "simulator.channels must be at least 1.")
        _require(self.episode_length >= 1, "simulator.episode_length must be at least 1.")
        _require(self.workers >= 1, "simulator.workers must be at least 1.")


@dataclass(kw_only=True, frozen=True)
class NoiseConfig:
    measurement_variance: float
    control_variance: float
    dynamics_variance: float

    def __post_init__(self):
        for name in ("measurement_variance", "control_variance", "dynamics_variance"):
            _require(getattr(self, name) >= 0, f"noise.{name} must be non-negative.")


@dataclass(kw_only=True, frozen=True)
class ModelConfig:
    family: ModelFamily
    height: int
    width: int
    channels: int
    latent_dim: int
    inducing_points: int
    filters: int
    encoder_hidden: int
    forward_hidden: int
    grid_low: float
    grid_high: float
    std_floor: float
    init_log_signal_variance: float
    init_log_lengthscale: float
    init_log_noise_variance: float
    bn_momentum: float
    bn_eps: float

    def __post_init__(self):
        _require(min(self.height, self.width) >= 4, "Model input frames are too small.")
        _require(self.channels >= 1, "model.channels must be at least 1.")
        _require(self.latent_dim >= 1, "model.latent_dim must be at least 1.")
        _require(self.inducing_points >= 2, "model.inducing_points must be at least 2.")
        _require(self.grid_low < self.grid_high, "model.grid_low must be below grid_high.")
        _require(self.std_floor > 0, "model.std_floor must be positive.")
        _require(0 < self.bn_momentum <= 1, "model.bn_momentum must lie in (0, 1].")

    @property
    def input_channels(self) -> int:
        # Two consecutive frames stacked along the channel axis
        return 2 * self.channels

    @property
    def measurement_shape(self) -> tuple[int, int, int]:
        return self.input_channels, self.height, self.width

    def snapshot(self) -> Json:
        return asdict(self)


@dataclass(kw_only=True, frozen=True)
class TrainConfig:
    lr_nn: float
    lr_gp: float
    weight_decay: float
    alpha: float
    beta: float
    var_weight: float
    batch_size: int
    epochs: int
    seed: int

    def __post_init__(self):
        _require(0 <= self.alpha <= 1, "train.alpha must lie in [0, 1].")
        _require(self.beta >= 0, "train.beta must be non-negative.")
        _require(self.var_weight >= 0, "train.var_weight must be non-negative.")
        _require(self.lr_nn >= 0 and self.lr_gp >= 0, "Learning rates must be non-negative.")
        _require(self.weight_decay >= 0, "train.weight_decay must be non-negative.")
        _require(self.batch_size >= 2, "train.batch_size must be at least 2.")
        _require(self.epochs >= 1, "train.epochs must be at least 1.")


@dataclass(kw_only=True, frozen=True)
class EvalConfig:
    samples: int
    average: Averaging
    batch_size: int
    grid_rows: int
    seed: int

    def __post_init__(self):
        _require(self.samples >= 1, "eval.samples must be at least 1.")
        _require(self.batch_size >= 1, "eval.batch_size must be at least 1.")
        _require(self.grid_rows >= 1, "eval.grid_rows must be at least 1.")


@dataclass(kw_only=True, frozen=True)
class LoggingConfig:
    level: str
    directory: str
    console: bool

    def __post_init__(self):
        _require(self.level in getLevelNamesMapping(), f"Unknown logging level {self.level!r}.")

    @property
    def level_number(self) -> int:
        return getLevelNamesMapping()[self.level]


@dataclass(kw_only=True, frozen=True)
class GlobalConfig:
    simulator: SimulatorConfig
    noise: NoiseConfig
    model: ModelConfig
    train: TrainConfig
    eval: EvalConfig
    logging: LoggingConfig


_DACITE_CONFIG = Config(strict=True, cast=[ModelFamily, Averaging], type_hooks={float: float})


def read_toml(path: Path, /) -> Json:
    try:
        with open(path, "rb") as file:
            return load(file)
    except OSError as error:
        raise ConfigurationError(f"Cannot read {path}: {error.strerror}.") from error
    except TOMLDecodeError as error:
        raise ConfigurationError(
            f"Malformed config file {path}: {error} (string values must be quoted)."
        ) from error


def build_config(data: Json, /) -> GlobalConfig:
    try:
        return from_dict(GlobalConfig, data, config=_DACITE_CONFIG)
    except DaciteError as error:
        raise ConfigurationError(f"Invalid configuration: {error}.") from error
    except ValueError as error:
        raise ConfigurationError(f"Invalid configuration value: {error}.") from error


def load_config(path: Path | None = None, /, *, overrides: Json | None = None) -> GlobalConfig:
    data = config_data

    if path is not None:
        data = deep_merge(data, read_toml(path))

    if overrides:
        data = deep_merge(data, overrides)

    return build_config(data)


config_file_path = root_dir() / "config.toml"

config_data: Json = read_toml(config_file_path)

config: GlobalConfig = build_config(config_data)
