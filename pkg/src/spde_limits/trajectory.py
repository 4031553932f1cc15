"""Time-indexed field snapshots on a uniform grid."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any

import numpy as np

from .errors import ConfigurationError, GridMismatchError
from .spectral import (
    ComplexArray,
    FloatArray,
    FourierGrid,
    SpectralField,
    sobolev_weight,
    to_physical,
    weighted_norm_sq,
)

STEP_TOLERANCE = 1e-9


def uniform_steps(T: float, dt: float) -> int:
    """
    Number of steps of size dt covering [0, T].

    Raises:
        ConfigurationError: If dt or T is not positive, dt > T, or T/dt is not
            an integer within a relative tolerance of 1e-9
    """
    if not (dt > 0 and T > 0):
        raise ConfigurationError(f"dt and T must be positive, got dt={dt}, T={T}")
    if dt > T:
        raise ConfigurationError(f"dt={dt} exceeds the horizon T={T}")
    steps = round(T / dt)
    if abs(steps * dt - T) > STEP_TOLERANCE * T:
        raise ConfigurationError(f"T={T} is not an integer multiple of dt={dt}")
    return int(steps)


def snapshot_times(T: float, steps: int, save_every: int) -> FloatArray:
    if steps < 1:
        raise ConfigurationError(f"steps must be >= 1, got {steps}")
    if save_every < 1 or steps % save_every:
        raise ConfigurationError(
            f"save_every={save_every} must divide the step count {steps}"
        )
    indices = np.arange(0, steps + 1, save_every)
    return indices * (T / steps)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    Snapshots coeffs[j] of one field at times[j].

    Times start at 0 and are uniformly spaced; every snapshot lives on the
    same grid. Norm sequences are computed lazily and cached.
    """

    grid: FourierGrid
    times: FloatArray
    coeffs: ComplexArray
    label: str = ""
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        n = self.grid.n
        if self.coeffs.ndim != 3 or self.coeffs.shape[1:] != (n, n):
            raise GridMismatchError(
                f"snapshot stack {self.coeffs.shape} does not match n={n}"
            )
        if self.times.shape != (self.coeffs.shape[0],):
            raise GridMismatchError(
                f"{self.times.shape[0]} times for {self.coeffs.shape[0]} snapshots"
            )
        if self.times[0] != 0.0 or np.any(np.diff(self.times) <= 0):
            raise ConfigurationError("snapshot times must start at 0 and increase")

    def __len__(self) -> int:
        return int(self.times.shape[0])

    @property
    def T(self) -> float:
        return float(self.times[-1])

    @property
    def dt(self) -> float:
        """Spacing between stored snapshots."""
        return self.T / (len(self) - 1) if len(self) > 1 else 0.0

    def snapshot(self, j: int) -> SpectralField:
        return SpectralField(self.grid, self.coeffs[j])

    def final(self) -> SpectralField:
        return self.snapshot(-1)

    @cached_property
    def physical(self) -> FloatArray:
        values = to_physical(self.coeffs, self.grid)
        values.setflags(write=False)
        return values

    @cached_property
    def l2(self) -> FloatArray:
        return np.sqrt(weighted_norm_sq(self.coeffs, 1.0))

    @cached_property
    def h_minus1(self) -> FloatArray:
        weight = sobolev_weight(self.grid, -1.0)
        return np.sqrt(weighted_norm_sq(self.coeffs, weight))

    @cached_property
    def sup(self) -> FloatArray:
        return np.max(np.abs(self.physical), axis=(-2, -1))

    def is_hermitian(self) -> bool:
        mirrored = self.grid.reflect(self.coeffs)
        return bool(np.array_equal(mirrored, np.conj(self.coeffs)))

    def check_compatible(self, other: Trajectory) -> None:
        """Raise GridMismatchError unless other shares grid and time grid."""
        if other.grid != self.grid:
            raise GridMismatchError(
                f"trajectories on n={self.grid.n} and n={other.grid.n} grids"
            )
        if len(other) != len(self) or not np.allclose(
            other.times, self.times, rtol=0.0, atol=1e-12 * max(self.T, 1.0)
        ):
            raise GridMismatchError(
                f"time grids differ: {len(self)} snapshots to T={self.T} vs "
                f"{len(other)} snapshots to T={other.T}"
            )

    def index_of_time(self, t: float) -> int:
        """Index of the snapshot stored at time t."""
        if not (0.0 <= t <= self.T * (1 + 1e-12)):
            raise ConfigurationError(f"time {t} outside [0, {self.T}]")
        j = int(round(t / self.dt)) if self.dt else 0
        if not math.isclose(self.times[j], t, rel_tol=1e-9, abs_tol=1e-12):
            raise ConfigurationError(f"no snapshot stored at t={t}")
        return j

    def combine(self, other: Trajectory, sign: float, label: str) -> Trajectory:
        self.check_compatible(other)
        return Trajectory(
            self.grid, self.times, self.coeffs + sign * other.coeffs, label
        )

    def norm_rows(self) -> list[dict[str, float]]:
        return [
            {
                "t": float(t),
                "l2": float(a),
                "h_minus1": float(b),
                "sup": float(c),
            }
            for t, a, b, c in zip(self.times, self.l2, self.h_minus1, self.sup)
        ]
