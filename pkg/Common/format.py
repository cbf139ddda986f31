__all__ = (
    "LOGGING_FORMAT",
    "FILE_DATE_FORMAT",
    "format_float",
    "format_shape",
)


LOGGING_FORMAT = "[PID: %(process)06d] %(asctime)s - %(levelname)-8s - %(message)s"
FILE_DATE_FORMAT = "%Y-%m-%d_%H-%M-%S"


def format_float(value: float, /) -> str:
    return f"{value:.9e}"


def format_shape(shape, /) -> str:
    return "(" + "×".join(str(extent) for extent in shape) + ")"
