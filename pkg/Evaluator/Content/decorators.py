from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from argparse import Namespace
    from collections.abc import Callable
    from typing import Any

    from .commands import Commands

    Json = dict[str, Any]
    CommandFunc = Callable[[Commands, Namespace], None]
    CommandDeco = Callable[[CommandFunc], CommandFunc]

__all__ = ("ensure_meta", "command", "argument")


def ensure_meta(obj: Any, /) -> Json:
    if not hasattr(obj, "__meta__"):
        obj.__meta__ = {}
    return obj.__meta__


def command(name: str, /, *, help: str) -> CommandDeco:

    def decorator(func: CommandFunc, /) -> CommandFunc:
        meta = ensure_meta(func)
        meta["command"] = {"name": name, "help": help}

        return func

    return decorator


def argument(*flags: str, setting: str | None = None, **options: Any) -> CommandDeco:
    """Adds a flag to a command; `setting` names the config field supplying its default."""

    def decorator(func: CommandFunc, /) -> CommandFunc:
        meta = ensure_meta(func)
        arguments = meta.setdefault("arguments", [])
        # Decorators apply bottom-up, so prepend to keep the written order
        arguments.insert(0, {"flags": flags, "setting": setting, "options": options})

        return func

    return decorator
