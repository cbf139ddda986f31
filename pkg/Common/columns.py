from __future__ import annotations

from abc import ABC, abstractmethod
from math import isfinite
from typing import TYPE_CHECKING

from .errors import DataError
from .format import format_float

if TYPE_CHECKING:
    from enum import Enum
    from typing import Any

__all__ = (
    "Column",
    "EnumColumn",
    "IntColumn",
    "BoolColumn",
    "FloatColumn",
)


class Column(ABC):
    """Converts one CSV cell between its Python value and its text form."""

    kind: str = "value"

    @abstractmethod
    def check(self, value: Any, /) -> Any:
        pass

    @abstractmethod
    def format(self, value: Any, /) -> str:
        pass

    @abstractmethod
    def parse(self, text: str, /) -> Any:
        pass

    def _invalid(self, text: str, /) -> DataError:
        return DataError(f"Expected {self.kind} in CSV cell, got {text!r}.")


class EnumColumn(Column):
    def __init__(self, cls: type[Enum], /):
        self.cls = cls
        self.kind = cls.__name__

    def check(self, value, /):
        return self.cls(value)

    def format(self, value, /):
        return str(self.cls(value).value)

    def parse(self, text, /):
        try:
            return self.cls(text)
        except ValueError:
            raise self._invalid(text) from None


class IntColumn(Column):
    kind = "an integer"

    def check(self, value, /):
        # bool is an int subclass, but never a valid count or index
        if isinstance(value, bool) or not isinstance(value, int):
            raise TypeError(f"Expected int; got {type(value).__name__}")
        return value

    def format(self, value, /):
        return str(self.check(value))

    def parse(self, text, /):
        try:
            return int(text)
        except ValueError:
            raise self._invalid(text) from None


class BoolColumn(Column):
    kind = "true or false"

    def check(self, value, /):
        if not isinstance(value, bool):
            raise TypeError(f"Expected bool; got {type(value).__name__}")
        return value

    def format(self, value, /):
        return "true" if self.check(value) else "false"

    def parse(self, text, /):
        if text not in ("true", "false"):
            raise self._invalid(text)
        return text == "true"


class FloatColumn(Column):
    """Fixed scientific notation, so equal runs write byte-identical files."""

    kind = "a number"

    def check(self, value, /):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise TypeError(f"Expected float; got {type(value).__name__}")
        return float(value)

    def format(self, value, /):
        value = self.check(value)
        return format_float(value) if isfinite(value) else str(value)

    def parse(self, text, /):
        try:
            return float(text)
        except ValueError:
            raise self._invalid(text) from None
