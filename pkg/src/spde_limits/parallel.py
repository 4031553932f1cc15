"""Worker pool sizing and order-preserving task fan-out."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, Optional, TypeVar

from .errors import ConfigurationError

logger = logging.getLogger(__name__)

WORKERS_ENV = "SPDE_LIMITS_WORKERS"

T = TypeVar("T")
R = TypeVar("R")


def resolve_workers(
    flag: Optional[int] = None, configured: Optional[int] = None
) -> tuple[int, str]:
    """
    Decide the worker count.

    The environment variable wins over the command-line flag, then the run
    config's ``workers``, then the logical core count.

    Returns:
        (workers, source) with source one of "env", "flag", "config",
        "cpu_count"
    """
    env = os.environ.get(WORKERS_ENV)
    if env is not None and env.strip():
        try:
            workers, source = int(env), "env"
        except ValueError:
            raise ConfigurationError(f"{WORKERS_ENV}={env!r} is not an integer")
    elif flag is not None:
        workers, source = flag, "flag"
    elif configured is not None:
        workers, source = configured, "config"
    else:
        workers, source = os.cpu_count() or 1, "cpu_count"
    if workers < 1:
        raise ConfigurationError(f"worker count must be >= 1, got {workers}")
    return workers, source


def run_tasks(
    func: Callable[[T], R],
    tasks: Iterable[T],
    workers: int = 1,
    on_result: Optional[Callable[[R], None]] = None,
) -> list[R]:
    """
    Apply func to every task, in parallel processes when workers > 1.

    Results come back in task order, so reductions over them are
    deterministic regardless of scheduling. func and the tasks must be
    picklable.

    Args:
        func: Task function
        tasks: Task arguments
        workers: Process count; 1 runs inline
        on_result: Called with each result, in task order, as soon as it and
            every earlier result are available
    """
    items = list(tasks)
    results: list[R] = []
    if workers <= 1 or len(items) <= 1:
        outputs: Iterable[R] = (func(item) for item in items)
        return _collect(outputs, results, on_result)
    max_workers = min(workers, len(items))
    logger.debug(f"Running {len(items)} tasks on {max_workers} processes")
    with ProcessPoolExecutor(max_workers=max_workers) as pool:
        return _collect(pool.map(func, items), results, on_result)


def _collect(
    outputs: Iterable[R],
    results: list[R],
    on_result: Optional[Callable[[R], None]],
) -> list[R]:
    for result in outputs:
        results.append(result)
        if on_result is not None:
            on_result(result)
    return results
