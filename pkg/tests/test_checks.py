"""
Tests for the fast invariant suite.
"""

import numpy as np
import pytest

from spde_limits.checks import (
    CheckHooks,
    CheckResult,
    check_coercivity,
    check_cubic_gap,
    check_parseval,
    check_transform_roundtrip,
    raise_on_failure,
    run_fast_checks,
)
from spde_limits.errors import InvariantViolation

CHECK_NAMES = [
    "transform_roundtrip",
    "parseval",
    "cubic_gap",
    "coercivity",
    "ou_statistics",
    "operator_bound",
]


@pytest.mark.unit
class TestIndividualChecks:
    """Test checks that need no long sampling."""

    def test_transform_checks(self, rng):
        assert "max error" in check_transform_roundtrip(rng)
        assert "relative error" in check_parseval(rng)

    def test_cubic_gap(self, rng):
        assert "pairs" in check_cubic_gap(rng)

    def test_cubic_gap_samples_the_nonlinearity(self, rng, monkeypatch):
        """A nonlinearity with the wrong sign of u³ breaks the gap check."""
        monkeypatch.setattr(
            "spde_limits.models.cubic", lambda u: np.asarray(u) + np.asarray(u) ** 3
        )
        with pytest.raises(InvariantViolation) as info:
            check_cubic_gap(rng)
        assert info.value.invariant == "cubic_gap"

    def test_coercivity_and_its_corruption(self):
        assert "lambda_k" in check_coercivity(CheckHooks())
        with pytest.raises(InvariantViolation) as info:
            check_coercivity(CheckHooks(corrupt_lambda_sign=True))
        assert info.value.invariant == "coercivity"


@pytest.mark.unit
class TestReporting:
    """Test result lines and failure propagation."""

    def test_line(self):
        result = CheckResult("parseval", True, "relative error 1e-16", 0.25)
        assert result.line() == "PASS parseval (0.25s): relative error 1e-16"
        assert CheckResult("x", False, "bad").line().startswith("FAIL x")

    def test_raise_on_failure_names_first_failure(self):
        results = [
            CheckResult("a", True, "ok"),
            CheckResult("b", False, "broken"),
            CheckResult("c", False, "also broken"),
        ]
        with pytest.raises(InvariantViolation, match="b: broken"):
            raise_on_failure(results)
        raise_on_failure(results[:1])


@pytest.mark.integration
class TestSuite:
    """Run the whole suite."""

    def test_all_checks_pass(self):
        results = run_fast_checks()
        assert [r.name for r in results] == CHECK_NAMES
        failed = [r.line() for r in results if not r.passed]
        assert failed == []
        assert all(np.isfinite(r.elapsed) for r in results)

    def test_corrupted_operator_fails_only_coercivity(self):
        results = run_fast_checks(CheckHooks(corrupt_lambda_sign=True))
        failed = [r.name for r in results if not r.passed]
        assert failed == ["coercivity"]
