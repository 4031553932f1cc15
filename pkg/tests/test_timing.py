"""
Tests for timing utility.
"""

import logging
import time

import pytest

from spde_limits.timing import Stopwatch, configure_logging, timed, timed_operation


def test_timed_operation_context_manager(caplog):
    """Test timed_operation context manager."""
    with caplog.at_level(logging.INFO):
        with timed_operation("coupled_solve eps=0.1"):
            time.sleep(0.01)

    assert "Starting coupled_solve eps=0.1" in caplog.text
    assert "Completed coupled_solve eps=0.1 in" in caplog.text


def test_timed_operation_yields_stopwatch():
    """The stopwatch freezes when the block exits."""
    with timed_operation("sleep") as watch:
        time.sleep(0.02)
        assert watch.stopped is None
    frozen = watch.elapsed
    assert frozen >= 0.02
    time.sleep(0.01)
    assert watch.elapsed == frozen


def test_stopwatch_runs_until_stopped():
    watch = Stopwatch()
    first = watch.elapsed
    time.sleep(0.005)
    assert watch.elapsed > first


def test_timed_operation_with_exception(caplog):
    """A raising block logs a failure line with the error, never completion."""
    with caplog.at_level(logging.INFO):
        with pytest.raises(ValueError):
            with timed_operation("coupled solve") as watch:
                raise ValueError("v became non-finite at t=0.137")

    messages = [record.getMessage() for record in caplog.records]
    assert messages[0] == "Starting coupled solve"
    assert messages[1].startswith("Failed coupled solve after ")
    assert messages[1].endswith(": v became non-finite at t=0.137")
    assert not any(m.startswith("Completed") for m in messages)
    assert caplog.records[1].levelno == logging.ERROR
    assert watch.stopped is not None


def test_timed_decorator_with_name(caplog):
    """Test timed decorator with custom name."""

    @timed("lattice_series")
    def shell_total(cutoff: int) -> int:
        time.sleep(0.01)
        return 8 * cutoff

    with caplog.at_level(logging.INFO):
        result = shell_total(5)

    assert result == 40
    assert "Starting lattice_series" in caplog.text
    assert "Completed lattice_series in" in caplog.text


def test_timed_decorator_without_name(caplog):
    """Test timed decorator uses function name by default."""

    @timed()
    def regime_scan() -> str:
        return "C0=0"

    with caplog.at_level(logging.INFO):
        result = regime_scan()

    assert result == "C0=0"
    assert "Starting regime_scan" in caplog.text
    assert "Completed regime_scan in" in caplog.text


def test_timed_decorator_no_parens(caplog):
    """Test timed decorator without parentheses."""

    @timed
    def solve_limit() -> int:
        return 42

    with caplog.at_level(logging.INFO):
        result = solve_limit()

    assert result == 42
    assert "Starting solve_limit" in caplog.text
    assert "Completed solve_limit in" in caplog.text


def test_timed_decorator_with_exception(caplog):
    """Test timed decorator logs errors properly."""

    @timed("coupled_solve")
    def diverging_solve() -> None:
        raise RuntimeError("non-finite coefficients at t=0.25")

    with caplog.at_level(logging.ERROR):
        with pytest.raises(RuntimeError):
            diverging_solve()

    assert "Failed coupled_solve after" in caplog.text
    assert "non-finite coefficients" in caplog.text


def test_timing_accuracy(caplog):
    """Test that timing is reasonably accurate."""

    @timed("timing_test")
    def slow_function() -> None:
        time.sleep(0.1)

    with caplog.at_level(logging.INFO):
        slow_function()

    log_message = [r for r in caplog.records if "Completed" in r.message][0].message

    # about 0.1s, with tolerance
    assert "0.1" in log_message or "0.09" in log_message or "0.11" in log_message


def test_timed_preserves_function_metadata():
    """Test that decorator preserves function metadata."""

    @timed
    def documented_function() -> int:
        """This function has documentation."""
        return 42

    assert documented_function.__name__ == "documented_function"
    assert documented_function.__doc__ == "This function has documentation."


def test_timed_with_args_and_kwargs(caplog):
    """Test timed decorator works with function arguments."""

    @timed("scaled_sum")
    def add(a: int, b: int, multiply: int = 1) -> int:
        return (a + b) * multiply

    with caplog.at_level(logging.INFO):
        result = add(3, 4, multiply=2)

    assert result == 14
    assert "Starting scaled_sum" in caplog.text
    assert "Completed scaled_sum in" in caplog.text


def test_configure_logging_is_callable():
    """Repeated configuration leaves existing handlers in place."""
    configure_logging(logging.DEBUG)
    configure_logging()
