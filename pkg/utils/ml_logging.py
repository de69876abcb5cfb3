import functools
import logging
import os
import time
from pathlib import Path
from typing import Callable, Optional, Union

# Milestone level between INFO and WARNING: run start, epoch end, checkpoint written
KEYINFO_LEVEL_NUM = 25
logging.addLevelName(KEYINFO_LEVEL_NUM, "KEYINFO")  # type: ignore

DEFAULT_LOGGER_NAME = "jiif"
LOG_FORMAT = (
    "%(asctime)s - %(name)s - %(processName)-10s - "
    "%(levelname)-8s %(message)s (%(filename)s:%(funcName)s:%(lineno)d)"
)


def keyinfo(self: logging.Logger, message, *args, **kws):  # type: ignore
    """
    Log 'msg % args' with severity 'KEYINFO'.
    """
    if self.isEnabledFor(KEYINFO_LEVEL_NUM):
        self._log(KEYINFO_LEVEL_NUM, message, args, **kws)


logging.Logger.keyinfo = keyinfo  # type: ignore


class CustomFormatter(logging.Formatter):  # type: ignore
    """
    CustomFormatter overrides 'funcName' and 'filename' attributes in the log record.

    When the `log_function_call` decorator logs on behalf of a wrapped entry point, this
    formatter keeps the wrapped function's name and file in the record instead of the
    decorator's own.
    """

    def format(self, record: logging.LogRecord) -> str:  # type: ignore
        record.funcName = getattr(record, "func_name_override", record.funcName)
        record.filename = getattr(record, "file_name_override", record.filename)
        return super().format(record)


def _resolve_level(level: Optional[Union[int, str]]) -> Optional[int]:
    if level is None:
        env_level = os.getenv("JIIF_LOG_LEVEL")
        if not env_level:
            return None
        level = env_level
    if isinstance(level, str):
        resolved = logging.getLevelName(level.upper())
        if not isinstance(resolved, int):
            raise ValueError(f"Unknown log level '{level}'")
        return resolved
    return level


def get_logger(
    name: str = DEFAULT_LOGGER_NAME,
    level: Optional[Union[int, str]] = None,
    include_stream_handler: bool = True,
    log_file: Optional[Union[str, Path]] = None,
) -> logging.Logger:  # type: ignore
    """
    Returns a configured logger with a custom name, level, and formatter.

    Parameters:
    name (str): Name of the logger.
    level (int | str, optional): Logging level. Falls back to the JIIF_LOG_LEVEL
        environment variable, then to INFO when the logger has no level yet.
    include_stream_handler (bool): Whether to include a stream handler. Defaults to True.
    log_file (str | Path, optional): Also append records to this file (one handler per path).

    Returns:
    logging.Logger: Configured logger instance.
    """
    formatter = CustomFormatter(LOG_FORMAT)
    logger = logging.getLogger(name)  # type: ignore

    resolved = _resolve_level(level)
    if resolved is not None or logger.level == 0:
        logger.setLevel(resolved or logging.INFO)  # type: ignore

    if include_stream_handler and not any(
        type(h) is logging.StreamHandler for h in logger.handlers
    ):  # type: ignore
        sh = logging.StreamHandler()  # type: ignore
        sh.setFormatter(formatter)
        logger.addHandler(sh)

    if log_file is not None:
        log_path = Path(log_file).resolve()
        already_attached = any(
            isinstance(h, logging.FileHandler)
            and Path(h.baseFilename).resolve() == log_path
            for h in logger.handlers
        )
        if not already_attached:
            log_path.parent.mkdir(parents=True, exist_ok=True)
            fh = logging.FileHandler(log_path, encoding="utf-8")
            fh.setFormatter(formatter)
            logger.addHandler(fh)

    return logger


def detach_file_handlers(name: str = DEFAULT_LOGGER_NAME) -> None:
    """Close and remove every file handler attached to the named logger."""
    logger = logging.getLogger(name)
    for handler in list(logger.handlers):
        if isinstance(handler, logging.FileHandler):
            handler.close()
            logger.removeHandler(handler)


def log_function_call(
    logger_name: str = DEFAULT_LOGGER_NAME,
    log_inputs: bool = False,
    log_output: bool = False,
) -> Callable:
    """
    Decorator to log function calls, input arguments, output and execution duration.

    Parameters:
    logger_name (str): The name for the logger.
    log_inputs (bool): Whether to log input arguments. Defaults to False.
    log_output (bool): Whether to log the function's output. Defaults to False.

    Returns:
    Callable: The decorated function.
    """

    def decorator_log_function_call(func):
        @functools.wraps(func)
        def wrapper_log_function_call(*args, **kwargs):
            logger = get_logger(logger_name)
            func_name = func.__name__
            extra = {
                "func_name_override": func_name,
                "file_name_override": os.path.basename(func.__code__.co_filename),
            }

            if log_inputs:
                args_str = ", ".join(map(str, args))
                kwargs_str = ", ".join(f"{k}={v}" for k, v in kwargs.items())
                logger.info(
                    f"call={func_name} args=[{args_str}] kwargs=[{kwargs_str}]",
                    extra=extra,
                )
            else:
                logger.info(f"call={func_name} status=started", extra=extra)

            start_time = time.time()
            result = func(*args, **kwargs)
            duration = time.time() - start_time

            if log_output:
                logger.info(f"call={func_name} output={result}", extra=extra)

            logger.info(
                f"call={func_name} status=completed duration_s={duration:.2f}",
                extra=extra,
            )
            return result

        return wrapper_log_function_call

    return decorator_log_function_call
