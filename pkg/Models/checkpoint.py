from __future__ import annotations

from json import JSONDecodeError, dumps, loads
from logging import INFO
from pathlib import Path
from struct import Struct
from struct import error as StructError
from typing import TYPE_CHECKING

import numpy as np

from Common import (
    ConfigMismatchError,
    ContractError,
    DimensionError,
    FormatError,
    atomic_write,
    derive_rng,
    log,
)

from .latent import build_model

if TYPE_CHECKING:
    from typing import Any

    from Common import ModelConfig

    from .latent import LatentModel

    Json = dict[str, Any]

__all__ = ("CHECKPOINT_MAGIC", "CHECKPOINT_VERSION", "save_checkpoint", "load_checkpoint")

CHECKPOINT_MAGIC = b"LDKC"
CHECKPOINT_VERSION = 1

_PREFIX = Struct("<4sHI")  # magic, version, snapshot length
_COUNT = Struct("<I")
_NAME = Struct("<H")
_RANK = Struct("<B")


def _encode_snapshot(snapshot: Json, /) -> bytes:
    return dumps(snapshot, sort_keys=True, separators=(",", ":")).encode()


def save_checkpoint(model: LatentModel, path: Path, /) -> None:
    """Writes the config snapshot and every named tensor (buffers included) atomically."""
    snapshot = _encode_snapshot(model.snapshot())
    chunks = [_PREFIX.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, len(snapshot)), snapshot]
    chunks.append(_COUNT.pack(len(model.store)))

    for parameter in model.store:
        name = parameter.name.encode()
        data = parameter.value.data
        chunks.append(_NAME.pack(len(name)) + name)
        chunks.append(_RANK.pack(data.ndim) + Struct(f"<{data.ndim}I").pack(*data.shape))
        chunks.append(data.astype("<f8").tobytes())

    def writer(target: Path) -> None:
        with open(target, "wb") as file:
            file.write(b"".join(chunks))

    atomic_write(path, writer)
    log(f"Checkpoint with {len(model.store)} tensors written to {path}.", INFO)


class _Reader:
    def __init__(self, path: Path, data: bytes, /):
        self.path = path
        self.data = data
        self.offset = 0

    def unpack(self, layout: Struct, what: str, /) -> tuple:
        try:
            values = layout.unpack_from(self.data, self.offset)
        except StructError:
            raise FormatError(self.path, self.offset, f"file ends inside the {what}") from None
        self.offset += layout.size
        return values

    def take(self, size: int, what: str, /) -> bytes:
        if self.offset + size > len(self.data):
            raise FormatError(self.path, len(self.data), f"file ends inside the {what}")
        chunk = self.data[self.offset : self.offset + size]
        self.offset += size
        return chunk


def _read_records(reader: _Reader, /) -> dict[str, np.ndarray]:
    (count,) = reader.unpack(_COUNT, "record count")
    state = {}

    for _ in range(count):
        (length,) = reader.unpack(_NAME, "record name")
        try:
            name = reader.take(length, "record name").decode()
        except UnicodeDecodeError:
            offset = reader.offset - length
            raise FormatError(reader.path, offset, "record name is not UTF-8") from None

        (rank,) = reader.unpack(_RANK, f"shape of {name!r}")
        shape = reader.unpack(Struct(f"<{rank}I"), f"shape of {name!r}")
        size = int(np.prod(shape, dtype=np.int64)) * 8
        payload = reader.take(size, f"payload of {name!r}")
        state[name] = np.frombuffer(payload, dtype="<f8").reshape(shape).astype(np.float64)

    if reader.offset != len(reader.data):
        raise FormatError(reader.path, reader.offset, "trailing bytes after the last record")

    return state


def _mismatches(saved: Json, current: Json, /, prefix: str = "") -> list[str]:
    found = []
    for key in sorted(set(saved) | set(current)):
        left, right = saved.get(key), current.get(key)
        if isinstance(left, dict) and isinstance(right, dict):
            found.extend(_mismatches(left, right, f"{prefix}{key}."))
        elif left != right:
            found.append(f"{prefix}{key}: checkpoint {left!r}, config {right!r}")
    return found


def load_checkpoint(path: Path, cfg: ModelConfig, control_scale: float, /) -> LatentModel:
    """Rebuilds a model from `path`; the stored config snapshot must match `cfg`."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as error:
        raise FormatError(path, 0, f"cannot read checkpoint ({error.strerror})") from error

    reader = _Reader(path, data)
    if data[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise FormatError(path, 0, f"bad magic {data[:4]!r}, expected {CHECKPOINT_MAGIC!r}")

    _, version, length = reader.unpack(_PREFIX, "header")
    if version != CHECKPOINT_VERSION:
        raise FormatError(
            path, 4, f"unsupported version {version}, expected {CHECKPOINT_VERSION}"
        )

    try:
        saved = loads(reader.take(length, "config snapshot"))
    except (JSONDecodeError, UnicodeDecodeError) as error:
        raise FormatError(path, _PREFIX.size, f"malformed config snapshot ({error})") from None

    model = build_model(cfg, control_scale, derive_rng(0))
    mismatches = _mismatches(saved, loads(_encode_snapshot(model.snapshot())))
    if mismatches:
        raise ConfigMismatchError(path, mismatches)

    state = _read_records(reader)
    try:
        model.store.load_state(state)
    except (ContractError, DimensionError) as error:
        raise ConfigMismatchError(path, [str(error)]) from error

    log(f"Checkpoint {path} loaded ({len(state)} tensors).", INFO)
    return model.eval()
