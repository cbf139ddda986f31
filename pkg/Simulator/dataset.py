from __future__ import annotations

from dataclasses import dataclass, replace
from logging import DEBUG, INFO
from math import pi
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from Common import (
    ConfigurationError,
    FormatError,
    NoiseConfig,
    atomic_write,
    create_process_pool,
    derive_rng,
    initialize_process,
    log,
)

from .pendulum import PendulumParams, PendulumState, step_dynamics, wrap_angle
from .render import render, stack_frames

if TYPE_CHECKING:
    from collections.abc import Iterator

    from Common import LoggingContext

__all__ = (
    "MAGIC",
    "FORMAT_VERSION",
    "HEADER_DTYPE",
    "TrueStateArray",
    "Transition",
    "DatasetHeader",
    "Dataset",
    "record_dtype",
    "simulate_episode",
    "generate_dataset",
    "save_dataset",
    "load_dataset",
)

MAGIC = b"LDKL"
FORMAT_VERSION = 1

# Little-endian and unaligned; the magic and version always come first
HEADER_DTYPE = np.dtype(
    [
        ("magic", "S4"),
        ("version", "<u2"),
        ("height", "<u2"),
        ("width", "<u2"),
        ("channels", "<u2"),
        ("count", "<u4"),
        ("episode_length", "<u4"),
        ("seed", "<i8"),
        ("mass", "<f8"),
        ("length", "<f8"),
        ("gravity", "<f8"),
        ("dt", "<f8"),
        ("torque_limit", "<f8"),
        ("max_speed", "<f8"),
        ("dynamics_std", "<f8"),
        ("measurement_variance", "<f8"),
        ("control_variance", "<f8"),
        ("dynamics_variance", "<f8"),
    ]
)

_PARAM_FIELDS = ("mass", "length", "gravity", "dt", "torque_limit", "max_speed", "dynamics_std")
_NOISE_FIELDS = ("measurement_variance", "control_variance", "dynamics_variance")


class TrueStateArray(np.ndarray):
    """Ground-truth pendulum states, kept for evaluation only.

    `Tensor` refuses to wrap instances of this class, so true states can never
    become a model input.
    """

    model_input_forbidden = True


def record_dtype(channels: int, height: int, width: int, /) -> np.dtype:
    frame_shape = (2 * channels, height, width)
    return np.dtype(
        [
            ("frames", "<f4", frame_shape),
            ("control", "<f4"),
            ("next_frames", "<f4", frame_shape),
            ("state", "<f4", (2,)),
            ("next_state", "<f4", (2,)),
        ]
    )


@dataclass(frozen=True, eq=False)
class Transition:
    frames: np.ndarray
    control: float
    next_frames: np.ndarray
    state: PendulumState
    next_state: PendulumState


@dataclass(kw_only=True, frozen=True)
class DatasetHeader:
    height: int
    width: int
    channels: int
    count: int
    episode_length: int
    seed: int
    params: PendulumParams
    noise: NoiseConfig

    @property
    def measurement_shape(self) -> tuple[int, int, int]:
        return 2 * self.channels, self.height, self.width

    @property
    def dtype(self) -> np.dtype:
        return record_dtype(self.channels, self.height, self.width)

    def encode(self) -> bytes:
        header = np.zeros((), dtype=HEADER_DTYPE)
        header["magic"] = MAGIC
        header["version"] = FORMAT_VERSION

        for name in ("height", "width", "channels", "count", "episode_length", "seed"):
            header[name] = getattr(self, name)
        for name in _PARAM_FIELDS:
            header[name] = getattr(self.params, name)
        for name in _NOISE_FIELDS:
            header[name] = getattr(self.noise, name)

        return header.tobytes()

    @classmethod
    def decode(cls, header: np.void, /) -> DatasetHeader:
        return cls(
            height=int(header["height"]),
            width=int(header["width"]),
            channels=int(header["channels"]),
            count=int(header["count"]),
            episode_length=int(header["episode_length"]),
            seed=int(header["seed"]),
            params=PendulumParams(**{name: float(header[name]) for name in _PARAM_FIELDS}),
            noise=NoiseConfig(**{name: float(header[name]) for name in _NOISE_FIELDS}),
        )


class Dataset:
    """A sequence of transitions backed by one structured array."""

    def __init__(self, header: DatasetHeader, records: np.ndarray, /):
        if records.dtype != header.dtype or len(records) != header.count:
            raise ConfigurationError("Dataset records do not match their header.")
        self.header = header
        self.records = records

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, index: int) -> Transition:
        record = self.records[index]
        return Transition(
            frames=record["frames"],
            control=float(record["control"]),
            next_frames=record["next_frames"],
            state=PendulumState(*map(float, record["state"])),
            next_state=PendulumState(*map(float, record["next_state"])),
        )

    def __iter__(self) -> Iterator[Transition]:
        for index in range(len(self)):
            yield self[index]

    @property
    def frames(self) -> np.ndarray:
        return self.records["frames"]

    @property
    def controls(self) -> np.ndarray:
        return self.records["control"]

    @property
    def next_frames(self) -> np.ndarray:
        return self.records["next_frames"]

    @property
    def states(self) -> TrueStateArray:
        return self.records["state"].view(TrueStateArray)

    @property
    def next_states(self) -> TrueStateArray:
        return self.records["next_state"].view(TrueStateArray)

    def episode_slice(self, index: int, /) -> slice:
        """The transitions belonging to the same episode as `index`."""
        length = self.header.episode_length
        start = (index // length) * length
        return slice(start, min(start + length, len(self)))

    def subset(self, indices: np.ndarray, /) -> Dataset:
        records = self.records[indices]
        return Dataset(replace(self.header, count=len(records)), records)


@dataclass(kw_only=True, frozen=True)
class _EpisodeJob:
    index: int
    length: int
    seed: int
    params: PendulumParams
    height: int
    width: int
    channels: int


def simulate_episode(
    index: int,
    length: int,
    params: PendulumParams,
    height: int,
    width: int,
    channels: int,
    seed: int,
    /,
) -> np.ndarray:
    """Rolls out one episode under a uniform random control law.

    Needs `length + 2` states: the extra leading state supplies the previous
    frame of the first measurement.
    """
    rng = derive_rng(seed, index)

    angle = wrap_angle(rng.uniform(-pi, pi))
    state = PendulumState(angle, rng.uniform(-1.0, 1.0))
    controls = rng.uniform(-params.torque_limit, params.torque_limit, size=length + 1)

    states = [state]
    for torque in controls:
        state = step_dynamics(state, float(torque), params, rng)
        states.append(state)

    images = [render(state, height, width) for state in states]
    records = np.zeros(length, dtype=record_dtype(channels, height, width))

    for k in range(length):
        records["frames"][k] = stack_frames(images[k], images[k + 1], channels)
        records["next_frames"][k] = stack_frames(images[k + 1], images[k + 2], channels)
        records["state"][k] = (states[k + 1].angle, states[k + 1].velocity)
        records["next_state"][k] = (states[k + 2].angle, states[k + 2].velocity)

    records["control"] = controls[1:]
    return records


def _run_job(job: _EpisodeJob, /) -> np.ndarray:
    log(f"Simulating episode {job.index} ({job.length} transitions).", DEBUG)
    return simulate_episode(
        job.index, job.length, job.params, job.height, job.width, job.channels, job.seed
    )


def save_dataset(path: Path, dataset: Dataset, /) -> None:
    def writer(target: Path) -> None:
        with open(target, "wb") as file:
            file.write(dataset.header.encode())
            file.write(dataset.records.tobytes())

    atomic_write(path, writer)
    log(f"Wrote {len(dataset)} transitions to {path}.", INFO)


def generate_dataset(
    path: Path | None,
    count: int,
    episode_length: int,
    params: PendulumParams,
    noise: NoiseConfig,
    height: int,
    width: int,
    channels: int,
    seed: int,
    /,
    *,
    workers: int = 1,
    log_ctx: LoggingContext | None = None,
) -> Dataset:
    """Simulates `count` clean transitions and writes them to `path` (if given).

    Only the dynamics disturbance is applied here; measurement and control
    noise belong to load time.
    """
    if count < 1 or episode_length < 1:
        raise ConfigurationError("A dataset needs at least one transition per episode.")

    jobs = [
        _EpisodeJob(
            index=index,
            length=min(episode_length, count - start),
            seed=seed,
            params=params,
            height=height,
            width=width,
            channels=channels,
        )
        for index, start in enumerate(range(0, count, episode_length))
    ]
    log(f"Generating {count} transitions across {len(jobs)} episodes.", INFO)

    if workers > 1 and len(jobs) > 1:
        level, queue = (log_ctx.level, log_ctx.queue) if log_ctx is not None else (INFO, None)
        with create_process_pool(
            max_workers=workers,
            initializer=initialize_process,
            initargs=(level, queue),
        ) as pool:
            episodes = list(pool.map(_run_job, jobs))
    else:
        episodes = [_run_job(job) for job in jobs]

    header = DatasetHeader(
        height=height,
        width=width,
        channels=channels,
        count=count,
        episode_length=episode_length,
        seed=seed,
        params=params,
        noise=noise,
    )
    dataset = Dataset(header, np.concatenate(episodes))

    if path is not None:
        save_dataset(path, dataset)

    return dataset


def load_dataset(path: Path, /) -> Dataset:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as error:
        raise FormatError(path, 0, f"cannot read file ({error.strerror})") from error

    if data[: len(MAGIC)] != MAGIC:
        raise FormatError(path, 0, f"bad magic {data[:len(MAGIC)]!r}, expected {MAGIC!r}")

    if len(data) < HEADER_DTYPE.itemsize:
        raise FormatError(path, len(data), "file ends inside the header")

    raw = np.frombuffer(data, dtype=HEADER_DTYPE, count=1)[0]
    if int(raw["version"]) != FORMAT_VERSION:
        raise FormatError(
            path,
            len(MAGIC),
            f"unsupported version {int(raw['version'])}, expected {FORMAT_VERSION}",
        )

    try:
        header = DatasetHeader.decode(raw)
    except ConfigurationError as error:
        raise FormatError(path, len(MAGIC) + 2, f"invalid header values ({error})") from error

    dtype = header.dtype
    expected = HEADER_DTYPE.itemsize + header.count * dtype.itemsize

    if len(data) < expected:
        raise FormatError(path, len(data), f"truncated records, expected {expected} bytes")
    if len(data) > expected:
        raise FormatError(path, expected, "trailing bytes after the last record")

    records = np.frombuffer(data, dtype=dtype, count=header.count, offset=HEADER_DTYPE.itemsize)
    log(f"Loaded {header.count} transitions from {path}.", DEBUG)

    return Dataset(header, records.copy())
