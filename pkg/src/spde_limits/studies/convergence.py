"""
Convergence study: u_ε - u - Z_ε → 0 along a decreasing ε grid.

Every (ε, sample) pair is an independent task. Sample i uses the same
Gaussian draws at every ε, and the limit u is solved once per worker
process for a given C₀ and reused across samples.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Callable, Optional, Sequence

from ..analysis import (
    convolution_events,
    convolution_statistics,
    eps_small_check,
    gamma_floor,
    residual_breakdown,
    sup_error_sq,
)
from ..config import AUTO, CZero, StudyConfig
from ..errors import ConfigurationError
from ..models import Model, SigmaSchedule
from ..noise import NoiseSeed
from ..parallel import run_tasks
from ..renorm import c_zero_estimate
from ..solver import SolveConfig, solve_coupled, solve_limit
from ..spectral import FourierGrid, weighted_norm_sq
from ..timing import Stopwatch, timed_operation
from ..trajectory import Trajectory
from .records import RunRecord, summarize

logger = logging.getLogger(__name__)

# ε grids used to extrapolate C₀ when a config asks for c_zero "auto"
AUTO_EPS_GRIDS = {
    Model.CH_AC_HOMOTOPY: (1e-2, 1e-3, 1e-4),
    Model.AC_BILAPLACIAN: (1e-1, 3e-2, 1e-2),
}

RecordCallback = Callable[[RunRecord], None]


def c_zero_for(
    model: Model,
    schedule: SigmaSchedule,
    c_zero: CZero,
    workers: int = 1,
) -> float:
    """
    The numeric C₀ for a model, noise schedule and configured c_zero.

    An explicit value wins. For "auto" the schedule's regime decides: 0 when
    σ_ε²·log(1/ε) → 0, the extrapolated series limit for logarithmic
    schedules.

    Raises:
        ConfigurationError: For "auto" with a divergent schedule or with
            mollified noise
    """
    if c_zero != AUTO:
        return float(c_zero)
    regime = schedule.regime
    if regime == "zero":
        return 0.0
    if regime == "divergent":
        raise ConfigurationError(
            f"c_zero 'auto' is undefined for {schedule.kind.value} noise; "
            "its C0 diverges"
        )
    if model not in AUTO_EPS_GRIDS:
        raise ConfigurationError(
            f"c_zero 'auto' is not available for {model.value}; "
            "give c_zero explicitly"
        )
    estimate = c_zero_estimate(schedule, AUTO_EPS_GRIDS[model], model, workers=workers)
    logger.info(f"Resolved C0 = {estimate.value:.6g} ({estimate.label})")
    return estimate.value


def resolve_c_zero(
    config: StudyConfig,
    schedule: Optional[SigmaSchedule] = None,
    workers: int = 1,
) -> float:
    """The numeric C₀ of a study, see :func:`c_zero_for`."""
    return c_zero_for(config.model, schedule or config.schedule, config.c_zero, workers)


@lru_cache(maxsize=8)
def limit_trajectory(config: StudyConfig, c_zero: float) -> Trajectory:
    """Solve the renormalized limit PDE once per process for (config, C₀)."""
    grid = FourierGrid(config.n)
    spec = config.spec(config.eps_grid[0], c_zero)
    initial = config.initial.build(grid)
    solve = SolveConfig(config.dt, config.T, initial, config.scheme, config.save_every)
    return solve_limit(spec, solve)


@dataclass(frozen=True)
class SampleTask:
    """One (ε, sample) coupled solve of a study."""

    config: StudyConfig
    eps: float
    sample: int
    c_zero: float
    gamma: float
    schedule: Optional[SigmaSchedule] = None


def run_sample(task: SampleTask) -> RunRecord:
    """Coupled solve, error field, residual budgets and event indicators."""
    config = task.config
    spec = config.spec(task.eps, task.c_zero, task.schedule)
    seed = NoiseSeed(config.master_seed, task.sample)
    watch = Stopwatch()
    limit = limit_trajectory(config, task.c_zero)
    solve = SolveConfig(
        config.dt, config.T, limit.snapshot(0), config.scheme, config.save_every
    )
    result = solve_coupled(spec, solve, seed, limit)
    assert result.error is not None
    residual = residual_breakdown(limit, result.z, spec)
    statistics = convolution_statistics(result.z, spec, config.p)
    error_sq = sup_error_sq(result.error)
    initial_gap = float(
        weighted_norm_sq(limit.coeffs[0] - result.u_eps.coeffs[0], 1.0)
    )
    events = convolution_events(
        result.z, spec, task.gamma, config.p, statistics=statistics
    )
    events["initial"] = int(initial_gap > task.gamma)
    events["residual"] = int(residual.total > task.gamma)
    if config.big_k is not None:
        events["error"] = int(error_sq > config.big_k * task.gamma)
    flags = {
        "gamma_below_floor": task.gamma < gamma_floor(spec),
        "eps_not_small": not eps_small_check(limit, spec),
    }
    record = RunRecord(
        model=spec.model.value,
        eps=spec.eps,
        sigma=spec.sigma,
        c_zero=task.c_zero,
        seed=config.master_seed,
        sample=task.sample,
        p=config.p,
        sup_error_sq=error_sq,
        residual=residual.to_dict(),
        statistics=statistics,
        events=events,
        flags=flags,
        wall_time=watch.elapsed,
    )
    logger.debug(
        f"{spec.label()} sample {task.sample}: sup error {record.sup_error:.3e}"
    )
    return record


def sample_tasks(
    config: StudyConfig,
    eps_values: Sequence[float],
    samples: range,
    c_zero: float,
    gamma: Optional[float] = None,
    schedule: Optional[SigmaSchedule] = None,
) -> list[SampleTask]:
    return [
        SampleTask(
            config,
            eps,
            i,
            c_zero,
            config.gamma if gamma is None else gamma,
            schedule,
        )
        for eps in eps_values
        for i in samples
    ]


@dataclass(frozen=True)
class ConvergenceResult:
    c_zero: float
    records: tuple[RunRecord, ...]
    summary: tuple[dict[str, Any], ...]

    @property
    def median_errors(self) -> list[float]:
        return [float(row["median_sup_error"]) for row in self.summary]

    @property
    def reduction(self) -> float:
        """Median error at the largest ε over that at the smallest ε."""
        errors = self.median_errors
        if errors[-1] == 0:
            return math.inf
        return errors[0] / errors[-1]


def run_convergence_study(
    config: StudyConfig,
    workers: int = 1,
    on_record: Optional[RecordCallback] = None,
    c_zero: Optional[float] = None,
) -> ConvergenceResult:
    """
    Monte Carlo estimate of sup_t‖u_ε - u - Z_ε‖_{L²} along the ε grid.

    Args:
        config: The study description
        workers: Processes for the (ε, sample) tasks
        on_record: Receives each RunRecord as soon as it and all earlier
            ones are done, so partial results survive a failure
        c_zero: Overrides the config's C₀

    Returns:
        Records in (ε, sample) order and a per-ε summary
    """
    c0 = resolve_c_zero(config, workers=workers) if c_zero is None else c_zero
    eps_values = sorted(config.eps_grid, reverse=True)
    tasks = sample_tasks(config, eps_values, range(config.samples), c0)
    with timed_operation(
        f"convergence study over {len(eps_values)} eps values x {config.samples}"
    ):
        records = run_tasks(run_sample, tasks, workers, on_record)
    summary = summarize(records)
    for row in summary:
        logger.info(
            f"eps={row['eps']:g}: median sup error {row['median_sup_error']:.4e}"
        )
    return ConvergenceResult(c0, tuple(records), tuple(summary))
