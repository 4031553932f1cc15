"""
Timing helpers for solves, series summations and studies.

Provides a context manager and decorator that log start/finish lines through
standard logging, so long Monte Carlo runs report progress without a metrics
layer. The context manager yields a stopwatch so callers can keep the wall
time (run records store it).
"""

import functools
import logging
import sys
import time
from collections.abc import Iterator
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, TypeVar, Union, overload

F = TypeVar("F", bound=Callable[..., Any])

logger = logging.getLogger(__name__)


@dataclass
class Stopwatch:
    """Wall-clock interval captured by `timed_operation`."""

    started: float = field(default_factory=time.perf_counter)
    stopped: Optional[float] = None

    @property
    def elapsed(self) -> float:
        end = self.stopped if self.stopped is not None else time.perf_counter()
        return end - self.started


@contextmanager
def timed_operation(operation_name: str) -> Iterator[Stopwatch]:
    """
    Context manager for timing an operation.

    Usage:
        with timed_operation("simulate into runs/sim-01") as watch:
            ...
        manifest["elapsed_seconds"] = watch.elapsed

    A block that raises is logged as failed with its elapsed time and the
    exception propagates.

    Args:
        operation_name: Name of the operation being timed

    Yields:
        Stopwatch: running interval, frozen when the block exits
    """
    watch = Stopwatch()
    logger.info(f"Starting {operation_name}")

    try:
        yield watch
    except Exception as e:
        watch.stopped = time.perf_counter()
        logger.error(f"Failed {operation_name} after {watch.elapsed:.2f}s: {e}")
        raise
    watch.stopped = time.perf_counter()
    logger.info(f"Completed {operation_name} in {watch.elapsed:.2f}s")


@overload
def timed(operation_name: F) -> F: ...


@overload
def timed(operation_name: Optional[str] = None) -> Callable[[F], F]: ...


def timed(
    operation_name: Union[str, Callable[..., Any], None] = None,
) -> Any:
    """
    Decorator for timing function execution.

    Can be used with or without arguments:
        @timed
        @timed()
        @timed("c_zero_estimate")

    Failures are logged with the elapsed time and re-raised.
    """

    def decorator(func: F, name: Optional[str]) -> F:
        op_name = name if name else func.__name__

        @functools.wraps(func)
        def wrapper(*args: Any, **kwargs: Any) -> Any:
            start_time = time.perf_counter()
            logger.info(f"Starting {op_name}")

            try:
                result = func(*args, **kwargs)
            except Exception as e:
                elapsed = time.perf_counter() - start_time
                logger.error(f"Failed {op_name} after {elapsed:.2f}s: {e}")
                raise
            elapsed = time.perf_counter() - start_time
            logger.info(f"Completed {op_name} in {elapsed:.2f}s")
            return result

        return wrapper  # type: ignore[return-value]

    if callable(operation_name):
        return decorator(operation_name, None)

    return lambda func: decorator(func, operation_name)


def configure_logging(level: int = logging.INFO) -> None:
    """
    Configure package logging on stderr.

    Diagnostics always go to stderr so stdout stays free for data.

    Args:
        level: Logging level (default: logging.INFO)
    """
    logging.basicConfig(
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        level=level,
        stream=sys.stderr,
    )
