from __future__ import annotations

from typing import TYPE_CHECKING

from .errors import DataError

if TYPE_CHECKING:
    from collections.abc import Mapping
    from typing import Any, ClassVar, Self

    from .columns import Column

__all__ = ("RowMeta", "Row")


class RowMeta(type):
    """Merges the `columns` of every base into one ordered mapping and slots the new ones."""

    def __new__(mcs, name: str, bases: tuple[type, ...], namespace: dict[str, Any], **kwargs):
        own = namespace.get("columns", {})

        # Base columns come first so subclasses append to the CSV header
        inherited: dict[str, Column] = {}
        for base in reversed(bases):
            inherited.update(getattr(base, "columns", {}))

        namespace["columns"] = inherited | own
        namespace["__slots__"] = tuple(key for key in own if key not in inherited)
        return super().__new__(mcs, name, bases, namespace, **kwargs)


class Row(metaclass=RowMeta):
    """One typed CSV record; subclasses declare `columns` in header order."""

    columns: ClassVar[dict[str, Column]] = {}

    def __init__(self, values: Mapping[str, Any], /):
        cls = type(self)
        if not cls.columns:
            raise TypeError(f"{cls.__name__} declares no columns.")

        missing = cls.columns.keys() - values.keys()
        extra = values.keys() - cls.columns.keys()
        if missing or extra:
            raise TypeError(
                f"{cls.__name__} fields: missing {sorted(missing)}, unknown {sorted(extra)}."
            )

        for key, column in cls.columns.items():
            setattr(self, key, column.check(values[key]))

    def __repr__(self):
        fields = ", ".join(f"{key}={getattr(self, key)!r}" for key in type(self).columns)
        return f"{type(self).__name__}({fields})"

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return all(getattr(self, key) == getattr(other, key) for key in type(self).columns)

    __hash__ = None

    @classmethod
    def header(cls) -> tuple[str, ...]:
        return tuple(cls.columns)

    @classmethod
    def new(cls, **fields: Any) -> Self:
        return cls(fields)

    @classmethod
    def parse(cls, record: Mapping[str, str], /) -> Self:
        if tuple(record) != cls.header():
            raise DataError(
                f"Expected {cls.__name__} columns {cls.header()}, got {tuple(record)}."
            )
        return cls({key: column.parse(record[key]) for key, column in cls.columns.items()})

    def record(self) -> dict[str, str]:
        columns = type(self).columns
        return {key: column.format(getattr(self, key)) for key, column in columns.items()}
