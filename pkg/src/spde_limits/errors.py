"""
Exception hierarchy for spde-limits.

Numerical operations validate their preconditions eagerly and raise one of
these; the CLI turns them into single-line diagnostics with stable exit codes.
"""


class SpdeLimitsError(Exception):
    """Base class for every error raised by this package."""

    kind = "error"


class ConfigurationError(SpdeLimitsError, ValueError):
    """A parameter or config value violates an operation's precondition."""

    kind = "configuration"


class GridMismatchError(SpdeLimitsError, ValueError):
    """Two fields or trajectories live on different spatial or time grids."""

    kind = "grid_mismatch"


class InvariantViolation(SpdeLimitsError, AssertionError):
    """A named numerical invariant failed in the check suite."""

    kind = "invariant"

    def __init__(self, invariant: str, detail: str) -> None:
        super().__init__(f"{invariant}: {detail}")
        self.invariant = invariant
        self.detail = detail


class SolverDivergence(SpdeLimitsError):
    """A time integration produced non-finite values."""

    kind = "divergence"


class StepSizeWarning(UserWarning):
    """The time step exceeds the documented stability guidance."""
