from sys import argv, exit

from Common import LoggingContext, config, root_dir
from Evaluator import run

if __name__ == "__main__":

    with LoggingContext(
        "Evaluator",
        config.logging.level_number,
        directory=root_dir() / config.logging.directory,
        console=config.logging.console,
    ) as log_ctx:

        code = run(argv[1:], log_ctx=log_ctx)

    exit(code)
