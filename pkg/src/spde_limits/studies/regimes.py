"""
Noise-strength regimes: how Z_ε and the renormalization constant behave when
σ_ε decays faster than, like, or slower than 1/log(1/ε).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Optional, Sequence

import numpy as np

from ..config import StudyConfig
from ..models import ModelSpec, SigmaKind, SigmaSchedule
from ..noise import NoiseSeed, sample_z_path
from ..parallel import run_tasks
from ..renorm import CZeroEstimate, MeanEstimate, c_zero_estimate, expected_norm_sq
from ..spectral import FourierGrid
from ..timing import timed, timed_operation
from .convergence import AUTO_EPS_GRIDS, RecordCallback, run_convergence_study

logger = logging.getLogger(__name__)

STANDARD_ERRORS = 3.0


def default_schedules(amplitude: float = 0.5) -> tuple[SigmaSchedule, ...]:
    """Power(1), LogInverse and Constant at a common amplitude."""
    return (
        SigmaSchedule(SigmaKind.POWER, amplitude, 1.0),
        SigmaSchedule(SigmaKind.LOG_INVERSE, amplitude),
        SigmaSchedule.constant(amplitude),
    )


@dataclass(frozen=True)
class ZNormTask:
    spec: ModelSpec
    n: int
    T: float
    steps: int
    seed: NoiseSeed


def final_norms(task: ZNormTask) -> tuple[float, float]:
    """‖Z_ε(T)‖²_{L²} and ‖Z_ε(T)‖²_{H^{-1}} of one sample."""
    grid = FourierGrid(task.n)
    z = sample_z_path(task.spec, grid, task.T, task.steps, task.seed, task.steps)
    return float(z.l2[-1] ** 2), float(z.h_minus1[-1] ** 2)


def _trend(values: Sequence[float]) -> str:
    diffs = np.diff(np.asarray(values, dtype=np.float64))
    if np.all(diffs > 0):
        return "increasing"
    if np.all(diffs < 0):
        return "decreasing"
    return "mixed"


def h_minus1_bound(spec: ModelSpec, grid: FourierGrid, T: float) -> float:
    """
    σ²Σ_{k≠0}(1+μ_k)^{-1}/(2μ_k) plus σ²T for a simulated zero mode.

    Dominates E‖Z_ε(T)‖²_{H^{-1}} because λ_k(ε) ≥ μ_k and α_k ≤ σ.
    """
    mu = grid.mu[grid.nonzero_mask]
    total = math.fsum((1.0 / ((1.0 + mu) * 2.0 * mu)).ravel())
    if spec.include_zero_mode:
        total += T
    return spec.sigma**2 * total


@dataclass(frozen=True)
class RegimeSummary:
    """One schedule's block of the regime scan."""

    schedule: SigmaSchedule
    c_zero: CZeroEstimate
    eps: tuple[float, ...]
    sigma: tuple[float, ...]
    exact_l2: tuple[float, ...]
    exact_h_minus1: tuple[float, ...]
    mc_l2: tuple[MeanEstimate, ...]
    mc_h_minus1: tuple[MeanEstimate, ...]
    h_minus1_bound: tuple[float, ...]
    error_medians: Optional[tuple[float, ...]] = None
    records: tuple[Any, ...] = field(default=(), repr=False)

    @property
    def tag(self) -> str:
        return self.c_zero.label

    @property
    def l2_trend(self) -> str:
        return _trend(self.exact_l2)

    @property
    def h_minus1_trend(self) -> str:
        return _trend(self.exact_h_minus1)

    @property
    def h_minus1_bounded(self) -> bool:
        return all(v <= b for v, b in zip(self.exact_h_minus1, self.h_minus1_bound))

    @property
    def mc_consistent(self) -> bool:
        """Monte Carlo means within 3 standard errors of the exact moments."""
        pairs = zip(
            self.exact_l2 + self.exact_h_minus1, self.mc_l2 + self.mc_h_minus1
        )
        return all(
            abs(m.mean - exact) <= STANDARD_ERRORS * m.stderr + 1e-12 * exact
            for exact, m in pairs
        )

    @property
    def error_decreasing(self) -> Optional[bool]:
        if self.error_medians is None:
            return None
        return _trend(self.error_medians) == "decreasing"

    def to_dict(self) -> dict[str, Any]:
        def estimates(values: Sequence[MeanEstimate]) -> list[dict[str, float]]:
            return [{"mean": m.mean, "stderr": m.stderr} for m in values]

        return {
            "schedule": self.schedule.to_dict(),
            "tag": self.tag,
            "c_zero": self.c_zero.to_dict(),
            "eps": list(self.eps),
            "sigma": list(self.sigma),
            "exact_l2": list(self.exact_l2),
            "exact_h_minus1": list(self.exact_h_minus1),
            "mc_l2": estimates(self.mc_l2),
            "mc_h_minus1": estimates(self.mc_h_minus1),
            "h_minus1_bound": list(self.h_minus1_bound),
            "l2_trend": self.l2_trend,
            "h_minus1_trend": self.h_minus1_trend,
            "h_minus1_bounded": self.h_minus1_bounded,
            "mc_consistent": self.mc_consistent,
            "error_medians": (
                None if self.error_medians is None else list(self.error_medians)
            ),
            "error_decreasing": self.error_decreasing,
        }


def regime_tag(config: StudyConfig, schedule: SigmaSchedule) -> CZeroEstimate:
    if schedule.regime == "finite" and config.model not in AUTO_EPS_GRIDS:
        return CZeroEstimate("finite", math.nan)
    grid = AUTO_EPS_GRIDS.get(config.model, ())
    return c_zero_estimate(schedule, grid, config.model)


def scan_schedule(
    config: StudyConfig,
    schedule: SigmaSchedule,
    workers: int = 1,
    on_record: Optional[RecordCallback] = None,
) -> RegimeSummary:
    """Second moments of Z_ε(T) along ε and, for C₀ = 0, the AC error."""
    grid = FourierGrid(config.n)
    eps_values = tuple(sorted(config.eps_grid, reverse=True))
    specs = [config.spec(eps, schedule=schedule) for eps in eps_values]
    tasks = [
        ZNormTask(
            spec, config.n, config.T, config.steps, NoiseSeed(config.master_seed, i)
        )
        for spec in specs
        for i in range(config.samples)
    ]
    with timed_operation(f"Z moments for {schedule.kind.value} noise"):
        norms = run_tasks(final_norms, tasks, workers)
    m = config.samples
    chunks = [norms[j * m : (j + 1) * m] for j in range(len(specs))]
    tag = regime_tag(config, schedule)
    medians = None
    records: tuple[Any, ...] = ()
    if tag.regime == "zero":
        plain = replace(config, schedule=schedule, c_zero=0.0)
        result = run_convergence_study(plain, workers, on_record, c_zero=0.0)
        medians = tuple(result.median_errors)
        records = result.records
    return RegimeSummary(
        schedule=schedule,
        c_zero=tag,
        eps=eps_values,
        sigma=tuple(spec.sigma for spec in specs),
        exact_l2=tuple(expected_norm_sq(s, grid, config.T, 0.0) for s in specs),
        exact_h_minus1=tuple(expected_norm_sq(s, grid, config.T, -1.0) for s in specs),
        mc_l2=tuple(MeanEstimate.of([c[0] for c in chunk]) for chunk in chunks),
        mc_h_minus1=tuple(MeanEstimate.of([c[1] for c in chunk]) for chunk in chunks),
        h_minus1_bound=tuple(h_minus1_bound(s, grid, config.T) for s in specs),
        error_medians=medians,
        records=records,
    )


@timed("regime scan")
def regime_scan(
    config: StudyConfig,
    workers: int = 1,
    on_record: Optional[RecordCallback] = None,
) -> list[RegimeSummary]:
    """
    One summary block per noise schedule.

    Uses ``config.schedules``, or Power(1), LogInverse and Constant at the
    amplitude of ``config.schedule`` when none are given.
    """
    schedules = config.schedules or default_schedules(config.schedule.amplitude)
    summaries = []
    for schedule in schedules:
        summary = scan_schedule(config, schedule, workers, on_record)
        logger.info(
            f"{schedule.kind.value}: {summary.tag}, L2 {summary.l2_trend}, "
            f"H-1 {summary.h_minus1_trend}"
        )
        summaries.append(summary)
    return summaries
