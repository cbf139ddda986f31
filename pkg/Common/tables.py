from __future__ import annotations

from csv import DictReader, DictWriter
from typing import TYPE_CHECKING

from .errors import DataError
from .utils import atomic_write

if TYPE_CHECKING:
    from collections.abc import Iterable
    from pathlib import Path

    from .bases import Row

__all__ = ("write_rows", "append_row", "read_rows")


def _table(file, cls: type[Row], /) -> DictWriter:
    return DictWriter(file, fieldnames=cls.header(), lineterminator="\n")


def write_rows(path: Path, cls: type[Row], rows: Iterable[Row], /) -> None:
    """Writes a header plus `rows`, replacing `path` only once the file is complete."""
    rows = list(rows)

    def writer(target: Path) -> None:
        with open(target, "w", newline="", encoding="utf-8") as file:
            table = _table(file, cls)
            table.writeheader()
            table.writerows(row.record() for row in rows)

    atomic_write(path, writer)


def append_row(path: Path, row: Row, /) -> None:
    exists = path.exists()

    try:
        with open(path, "a", newline="", encoding="utf-8") as file:
            table = _table(file, type(row))
            if not exists:
                table.writeheader()
            table.writerow(row.record())
    except OSError as error:
        raise DataError(f"Cannot append to {path}: {error.strerror or error}.") from error


def read_rows(path: Path, cls: type[Row], /) -> list[Row]:
    try:
        with open(path, newline="", encoding="utf-8") as file:
            reader = DictReader(file)
            if tuple(reader.fieldnames or ()) != cls.header():
                raise DataError(f"{path}: header does not match {cls.__name__}.")
            return [cls.parse(record) for record in reader]
    except OSError as error:
        raise DataError(f"Cannot read {path}: {error.strerror or error}.") from error

