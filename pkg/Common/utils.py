from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from contextlib import suppress
from datetime import datetime, timezone
from functools import partial
from logging import DEBUG, INFO, FileHandler, Formatter, StreamHandler, getLogger
from logging.handlers import QueueHandler, QueueListener
from multiprocessing import Queue
from os import cpu_count, makedirs, replace
from pathlib import Path
from signal import SIGINT, SIGTERM, signal
from typing import TYPE_CHECKING

import numpy as np

from .errors import DataError
from .format import FILE_DATE_FORMAT, LOGGING_FORMAT

if TYPE_CHECKING:
    from collections.abc import Callable
    from typing import Any, Self

    Json = dict[str, Any]

__all__ = (
    "root_dir",
    "derive_rng",
    "deep_merge",
    "atomic_write",
    "LoggingContext",
    "log",
    "create_process_pool",
    "initialize_process",
)


def root_dir() -> Path:
    import sys

    if getattr(sys, "frozen", False):
        return Path(sys.executable).parent
    return Path(__file__).resolve().parent.parent


def derive_rng(seed: int, /, *keys: int) -> np.random.Generator:
    """An independent stream per (seed, *keys); equal tuples replay equal draws."""
    return np.random.default_rng([seed, *keys])


def deep_merge(base: Json, override: Json, /) -> Json:
    merged = dict(base)

    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value

    return merged


def atomic_write(path: Path, writer: Callable[[Path], None], /) -> None:
    """Lets `writer` fill a hidden sibling file, then renames it over `path`.

    Any OS-level failure surfaces as a `DataError` naming `path`.
    """
    path = Path(path)
    temp = path.with_name(f".{path.name}.tmp")

    try:
        makedirs(path.parent, exist_ok=True)
        writer(temp)
        replace(temp, path)
    except OSError as error:
        raise DataError(f"Cannot write {path}: {error.strerror or error}.") from error
    finally:
        with suppress(OSError):
            temp.unlink(missing_ok=True)


def _attach_queue(level: int, queue: Queue, /) -> None:
    root = getLogger()
    root.setLevel(level)
    root.handlers.clear()
    root.addHandler(QueueHandler(queue))


class LoggingContext:
    """Routes every record, including those of worker processes, through one queue.

    Records end up in `<directory>/<module>/<UTC timestamp>.txt` and, when
    `console` is set, on stderr.
    """

    def __init__(
        self,
        module: str,
        level: int = DEBUG,
        /,
        *,
        directory: Path | None = None,
        console: bool = False,
    ):
        stamp = datetime.now(timezone.utc).strftime(FILE_DATE_FORMAT)
        self.folder = (directory or root_dir() / "Logs") / module
        self.file = self.folder / f"{stamp}.txt"
        self.level = level
        self.console = console

        self.queue: Queue | None = None
        self.listener: QueueListener | None = None

    def __enter__(self) -> Self:
        self.__start__()
        return self

    def __exit__(self, *_) -> None:
        self.__stop__()

    def __start__(self) -> None:
        makedirs(self.folder, exist_ok=True)

        handlers = [FileHandler(self.file, encoding="utf-8")]
        if self.console:
            handlers.append(StreamHandler())

        formatter = Formatter(LOGGING_FORMAT)
        for handler in handlers:
            handler.setFormatter(formatter)

        self.queue = Queue()
        self.listener = QueueListener(self.queue, *handlers)
        self.listener.start()

        _attach_queue(self.level, self.queue)

    def __stop__(self) -> None:
        getLogger().handlers.clear()

        if self.listener is not None:
            self.listener.stop()
            for handler in self.listener.handlers:
                handler.close()
        if self.queue is not None:
            self.queue.close()
            self.queue.join_thread()

        self.listener = self.queue = None


def log(message: str, level: int = INFO, /, *, error: BaseException | None = None) -> None:
    getLogger().log(level, message, exc_info=error)


def create_process_pool(*, max_workers: int, **kwargs: Any) -> ProcessPoolExecutor:
    # One core stays free for the parent and its queue listener
    workers = max(min((cpu_count() or 1) - 1, max_workers), 1)
    return ProcessPoolExecutor(max_workers=workers, **kwargs)


def _exit_on_signal(code: int, /, *_) -> None:
    raise SystemExit(code)


def initialize_process(level: int, queue: Queue | None, /) -> None:
    if queue is not None:
        _attach_queue(level, queue)
    signal(SIGINT, partial(_exit_on_signal, 130))
    signal(SIGTERM, partial(_exit_on_signal, 143))
    log("Dataset worker initialised.", DEBUG)
