"""
Shared command utilities: the exit-code taxonomy, exception mapping and
operation timing.
"""

import logging
import time
from collections.abc import Callable
from enum import IntEnum
from functools import wraps
from typing import ParamSpec, TypeVar

from tasync.errors import (
    InvalidCommandError,
    InvalidScenarioError,
    OutputError,
    TaSyncError,
    UnsupportedNumerologyError,
    UsageError,
)
from utils.metrics import gauge, histogram, increment

logger = logging.getLogger(__name__)

P = ParamSpec("P")
R = TypeVar("R")


class ExitCode(IntEnum):
    """Process exit statuses; stable so CI can assert on them."""

    OK = 0
    INTERNAL_ERROR = 1
    USAGE_ERROR = 2
    INVALID_SCENARIO = 3
    BUDGET_TARGET_MISSED = 4
    IO_ERROR = 5


def map_exception_to_exit_code(exception: BaseException) -> tuple[ExitCode, str]:
    """
    Map an exception raised by a command to its exit code and a user-facing message.

    Args:
        exception: The exception to map

    Returns:
        Exit code and the message to print on stderr
    """
    if isinstance(exception, UsageError | UnsupportedNumerologyError):
        code, error_type = ExitCode.USAGE_ERROR, "usage"
        message = f"usage error: {exception}"
    elif isinstance(exception, OutputError):
        code, error_type = ExitCode.IO_ERROR, "io"
        message = f"I/O error: {exception}"
    elif isinstance(exception, OSError):
        code, error_type = ExitCode.IO_ERROR, "io"
        path = exception.filename or "<unknown>"
        message = f"I/O error: {path}: {exception.strerror or exception}"
    elif isinstance(exception, InvalidScenarioError | InvalidCommandError | TaSyncError):
        code, error_type = ExitCode.INVALID_SCENARIO, "invalid_scenario"
        message = f"invalid input: {exception}"
    else:
        code, error_type = ExitCode.INTERNAL_ERROR, "internal"
        message = f"internal error: {type(exception).__name__}: {exception}"

    increment("command_errors", tags={"error_type": error_type})
    logger.error(
        message,
        extra={
            "action": "command_failed",
            "exit_code": int(code),
            "error_type": type(exception).__name__,
            "error_details": str(exception),
        },
    )
    return code, message


def time_operation(
    component: str, operation_name: str
) -> Callable[[Callable[P, R]], Callable[P, R]]:
    """
    Decorator to time an operation and record success/error metrics.

    Args:
        component: Name of the component for metrics tagging
        operation_name: Name of the operation for metrics tagging
    """

    def decorator(func: Callable[P, R]) -> Callable[P, R]:
        @wraps(func)
        def wrapper(*args: P.args, **kwargs: P.kwargs) -> R:
            start_time = time.perf_counter()
            tags = {"component": component, "operation": operation_name}

            try:
                result = func(*args, **kwargs)
            except Exception as e:
                duration = time.perf_counter() - start_time
                increment("operations_total", tags={**tags, "status": "error"})
                histogram("operation_duration", duration, tags={**tags, "error": "true"})
                logger.error(
                    f"{component} {operation_name} failed",
                    extra={
                        "action": f"{component}_{operation_name}_failed",
                        "duration": duration,
                        "error": str(e),
                        "error_type": type(e).__name__,
                    },
                )
                raise

            duration = time.perf_counter() - start_time
            increment("operations_total", tags={**tags, "status": "success"})
            histogram("operation_duration", duration, tags=tags)
            gauge("operation_last_duration", duration, tags={"component": component})
            logger.debug(
                f"{component} {operation_name} completed",
                extra={"action": f"{component}_{operation_name}_completed", "duration": duration},
            )
            return result

        return wrapper

    return decorator
