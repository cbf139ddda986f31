from __future__ import annotations

from argparse import ArgumentParser
from logging import ERROR
from pathlib import Path
from typing import TYPE_CHECKING

from Common import PipelineError, load_config, log

from .commands import Commands

if TYPE_CHECKING:
    from argparse import Namespace
    from collections.abc import Sequence

    from Common import LoggingContext

__all__ = ("PROGRAM", "config_parser", "build_parser", "run")

PROGRAM = "python -m Evaluator"


def config_parser() -> ArgumentParser:
    parser = ArgumentParser(add_help=False)
    parser.add_argument(
        "--config",
        type=Path,
        default=None,
        help=(
            "TOML file of `key = value` overrides for config.toml (dotted keys); "
            'string values are quoted, e.g. `eval.average = "latent"`.'
        ),
    )
    return parser


def build_parser(commands: Commands, /) -> ArgumentParser:
    parser = ArgumentParser(
        prog=PROGRAM,
        description="Latent dynamics learning from noisy pendulum images.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="command")
    commands.register_commands(subparsers, parents=[config_parser()])
    return parser


def _parse(argv: Sequence[str], log_ctx: LoggingContext | None, /) -> Namespace:
    # The override file decides the defaults shown by --help, so it is read first
    known, _ = config_parser().parse_known_args(argv)
    cfg = load_config(known.config)
    args = build_parser(Commands(cfg, log_ctx=log_ctx)).parse_args(argv)
    return args


def run(argv: Sequence[str], /, *, log_ctx: LoggingContext | None = None) -> int:
    """Parses and runs one command, returning the process exit code."""
    try:
        args = _parse(list(argv), log_ctx)
        args.handler(args)
    except SystemExit as error:
        # argparse exits with 2 on usage errors and 0 after --help
        return error.code if isinstance(error.code, int) else 2
    except PipelineError as error:
        log(f"{type(error).__name__}: {error}", ERROR)
        return error.exit_code
    except Exception as error:
        log("Unexpected failure.", ERROR, error=error)
        return 1

    return 0
