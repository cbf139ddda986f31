from __future__ import annotations

from typing import TYPE_CHECKING

from .format import format_shape

if TYPE_CHECKING:
    from collections.abc import Sequence
    from typing import Any, ClassVar

__all__ = (
    "PipelineError",
    "UsageError",
    "ConfigurationError",
    "DimensionError",
    "ContractError",
    "DataError",
    "FormatError",
    "ConfigMismatchError",
    "NumericalError",
)


class PipelineError(Exception):
    exit_code: ClassVar[int] = 1


class UsageError(PipelineError):
    exit_code = 2


class ConfigurationError(UsageError):
    pass


class DimensionError(PipelineError):
    def __init__(self, op: str, /, *shapes: Sequence[int]):
        formatted = ", ".join(format_shape(shape) for shape in shapes)
        super().__init__(f"{op}: incompatible shapes {formatted}.")
        self.op = op
        self.shapes = tuple(tuple(shape) for shape in shapes)


class ContractError(PipelineError):
    pass


class DataError(PipelineError):
    exit_code = 3


class FormatError(DataError):
    def __init__(self, path: Any, offset: int, reason: str, /):
        super().__init__(f"{path}: {reason} (byte offset {offset}).")
        self.path = path
        self.offset = offset
        self.reason = reason


class ConfigMismatchError(DataError):
    def __init__(self, path: Any, mismatches: Sequence[str], /):
        super().__init__(f"{path} does not match the current config: {'; '.join(mismatches)}.")
        self.path = path
        self.mismatches = tuple(mismatches)


class NumericalError(PipelineError):
    exit_code = 4

    def __init__(self, reason: str, /, *, jitters: Sequence[float] = ()):
        if jitters:
            ladder = ", ".join(f"{jitter:.0e}" for jitter in jitters)
            reason = f"{reason} (jitter ladder tried: {ladder})"
        super().__init__(reason)
        self.jitters = tuple(jitters)
