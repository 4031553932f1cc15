"""
Time integration on the shared spectral grid.

Three problems are integrated with the same first-order schemes:

- the transformed random PDE ∂_t v = A_ε v + F_ε(v + Z_ε), with u_ε = v + Z_ε,
- the renormalized limit ∂_t u = Δu + u - u³ - 3C₀u,
- the deterministic ε-model (σ = 0).

The linear part is diagonal and treated implicitly (IMEX) or exactly
(exponential Euler); the nonlinearity is explicit and evaluated with
dealiased products.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np
from numpy.typing import ArrayLike
from scipy.integrate import solve_ivp

from .errors import (
    ConfigurationError,
    GridMismatchError,
    SolverDivergence,
    StepSizeWarning,
)
from .models import (
    Model,
    ModelSpec,
    limit_drift,
    nonlinearity,
    spectral_symbols,
)
from .noise import NoiseSeed, OUState, increments_for
from .spectral import ComplexArray, FloatArray, SpectralField, to_physical
from .timing import timed_operation
from .trajectory import Trajectory, snapshot_times, uniform_steps

logger = logging.getLogger(__name__)

Drift = Callable[[SpectralField], SpectralField]


class Scheme(str, Enum):
    IMEX = "imex"
    EXPONENTIAL_EULER = "exponential_euler"


@dataclass(frozen=True, eq=False)
class SolveConfig:
    """Time grid, scheme and initial data for one solve."""

    dt: float
    T: float
    initial: SpectralField
    scheme: Scheme = Scheme.IMEX
    save_every: int = 1

    def __post_init__(self) -> None:
        steps = uniform_steps(self.T, self.dt)
        snapshot_times(self.T, steps, self.save_every)

    @property
    def steps(self) -> int:
        return uniform_steps(self.T, self.dt)

    @property
    def times(self) -> FloatArray:
        return snapshot_times(self.T, self.steps, self.save_every)

    def refined(self, factor: int = 2) -> SolveConfig:
        """Same snapshot times with a step factor times smaller."""
        return SolveConfig(
            dt=self.dt / factor,
            T=self.T,
            initial=self.initial,
            scheme=self.scheme,
            save_every=self.save_every * factor,
        )


def phi1(x: ArrayLike) -> FloatArray:
    """(e^x - 1)/x with the removable singularity φ₁(0) = 1."""
    x = np.asarray(x, dtype=np.float64)
    safe = np.where(x == 0.0, 1.0, x)
    return np.where(x == 0.0, 1.0, np.expm1(safe) / safe)


@dataclass(frozen=True, eq=False)
class Propagator:
    """v⁺ = decay·v + forcing·N for a fixed diagonal rate table and step."""

    decay: FloatArray
    forcing: FloatArray

    @classmethod
    def build(cls, lam: FloatArray, dt: float, scheme: Scheme) -> Propagator:
        if scheme is Scheme.IMEX:
            denom = 1.0 + dt * lam
            return cls(1.0 / denom, dt / denom)
        return cls(np.exp(-lam * dt), dt * phi1(-lam * dt))

    def __call__(
        self, v: ComplexArray, drift: Optional[ComplexArray]
    ) -> ComplexArray:
        if drift is None:
            return self.decay * v
        return self.decay * v + self.forcing * drift


def step_v(
    spec: ModelSpec,
    v: SpectralField,
    z: SpectralField,
    dt: float,
    scheme: Scheme = Scheme.IMEX,
    nonlinear: bool = True,
) -> SpectralField:
    """
    One step of ∂_t v = A_ε v + F_ε(v + z).

    Args:
        spec: The ε-model
        v: State at the start of the step
        z: Z_ε snapshot at the start of the step
        dt: Step size
        scheme: IMEX or exponential Euler
        nonlinear: Set False to drop F_ε (pure linear flow)

    Returns:
        State at the end of the step
    """
    if v.grid != z.grid:
        raise GridMismatchError(f"v on n={v.grid.n} but z on n={z.grid.n}")
    if not dt > 0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    symbols = spectral_symbols(spec, v.grid)
    propagate = Propagator.build(symbols.lam, dt, scheme)
    drift = nonlinearity(spec, v + z).coeffs if nonlinear else None
    return SpectralField(v.grid, propagate(v.coeffs, drift))


def stability_limit(spec: ModelSpec, initial: SpectralField) -> float:
    """dt guidance 0.5/(1 + ε(n/4)²·3‖u₀‖∞²) for the homotopy model."""
    sup = float(np.max(np.abs(to_physical(initial.coeffs, initial.grid))))
    k_max = initial.grid.dealias_cutoff
    return 0.5 / (1.0 + spec.eps * k_max**2 * 3.0 * sup**2)


def _warn_step_size(spec: ModelSpec, config: SolveConfig) -> None:
    if spec.model is not Model.CH_AC_HOMOTOPY:
        return
    limit = stability_limit(spec, config.initial)
    if config.dt > limit:
        message = (
            f"dt={config.dt:g} exceeds the stability guidance {limit:.3g} "
            f"for {spec.label()}"
        )
        logger.warning(message)
        warnings.warn(message, StepSizeWarning, stacklevel=3)


def _check_finite(coeffs: ComplexArray, t: float, label: str) -> None:
    if not np.all(np.isfinite(coeffs)):
        raise SolverDivergence(f"{label} became non-finite at t={t:g}")


def _integrate(
    lam: FloatArray,
    drift: Optional[Drift],
    config: SolveConfig,
    label: str,
) -> Trajectory:
    grid = config.initial.grid
    propagate = Propagator.build(lam, config.dt, config.scheme)
    v = config.initial.coeffs.copy()
    snapshots = [v]
    for step in range(config.steps):
        n_hat = drift(SpectralField(grid, v)).coeffs if drift else None
        v = propagate(v, n_hat)
        if (step + 1) % config.save_every == 0:
            _check_finite(v, (step + 1) * config.dt, label)
            snapshots.append(v)
    return Trajectory(grid, config.times, np.stack(snapshots), label=label)


def solve_limit(
    spec: ModelSpec, config: SolveConfig, nonlinear: bool = True
) -> Trajectory:
    """
    Integrate the limit equation ∂_t u = Δu + u - u³ - 3C₀u.

    Raises:
        ConfigurationError: If the model spec carries no C₀
    """
    c_zero = spec.require_c_zero()
    mu = config.initial.grid.mu

    def drift(u: SpectralField) -> SpectralField:
        return limit_drift(u, c_zero)

    label = f"limit(C0={c_zero:g})"
    with timed_operation(f"solve {label}"):
        return _integrate(mu, drift if nonlinear else None, config, label)


def solve_deterministic(
    spec: ModelSpec, config: SolveConfig, nonlinear: bool = True
) -> Trajectory:
    """Integrate the ε-model without noise, ∂_t u = A_ε u + F_ε(u)."""
    _warn_step_size(spec, config)
    symbols = spectral_symbols(spec, config.initial.grid)

    def drift(u: SpectralField) -> SpectralField:
        return nonlinearity(spec, u)

    label = f"deterministic {spec.label()}"
    with timed_operation(f"solve {label}"):
        return _integrate(symbols.lam, drift if nonlinear else None, config, label)


@dataclass(frozen=True, eq=False)
class CoupledResult:
    """Z_ε, v_ε and u_ε = v_ε + Z_ε on one time grid, plus φ_ε = v_ε - u."""

    z: Trajectory
    v: Trajectory
    u_eps: Trajectory
    error: Optional[Trajectory] = None
    meta: dict[str, object] = field(default_factory=dict)


def solve_coupled(
    spec: ModelSpec,
    config: SolveConfig,
    seed: NoiseSeed,
    limit: Optional[Trajectory] = None,
) -> CoupledResult:
    """
    Solve the ε-SPDE for one noise sample through the v-formulation.

    Z_ε is advanced by the exact OU recursion on the step grid and v_ε by
    ``step_v`` using the Z_ε snapshot at the start of each step.

    Args:
        spec: The ε-model with its noise strength
        config: Time grid and initial data u_ε(0) = v_ε(0)
        seed: Noise sample
        limit: Limit trajectory u on the same snapshot times; when given
            the error field φ_ε = v_ε - u = u_ε - u - Z_ε is returned too

    Raises:
        GridMismatchError: If ``limit`` is stored on a different time grid
    """
    grid = config.initial.grid
    times = config.times
    if limit is not None and (
        limit.grid != grid
        or len(limit) != len(times)
        or not np.allclose(limit.times, times, rtol=0.0, atol=1e-12 * config.T)
    ):
        raise GridMismatchError(
            f"limit trajectory has {len(limit)} snapshots to T={limit.T}, "
            f"config stores {len(times)} to T={config.T}"
        )
    _warn_step_size(spec, config)

    symbols = spectral_symbols(spec, grid)
    propagate = Propagator.build(symbols.lam, config.dt, config.scheme)
    state = OUState.start(spec, grid)
    v = config.initial.coeffs.copy()
    z = state.z().coeffs
    v_snaps, z_snaps = [v], [z]
    label = f"{spec.label()} sample {seed.sample}"
    with timed_operation(f"coupled solve {label}"):
        for step in range(config.steps):
            n_hat = nonlinearity(spec, SpectralField(grid, v + z)).coeffs
            v = propagate(v, n_hat)
            state.advance(config.dt, increments_for(seed, step, grid))
            z = state.z().coeffs
            if (step + 1) % config.save_every == 0:
                _check_finite(v, (step + 1) * config.dt, label)
                v_snaps.append(v)
                z_snaps.append(z)

    meta = {"master_seed": seed.master, "sample": seed.sample, "eps": spec.eps}
    z_traj = Trajectory(grid, times, np.stack(z_snaps), f"Z {label}", meta)
    v_traj = Trajectory(grid, times, np.stack(v_snaps), f"v {label}", meta)
    u_eps = v_traj.combine(z_traj, 1.0, f"u_eps {label}")
    error = v_traj.combine(limit, -1.0, f"error {label}") if limit is not None else None
    return CoupledResult(z_traj, v_traj, u_eps, error, meta)


def scalar_limit_oracle(
    u0: float, c_zero: float, times: FloatArray
) -> FloatArray:
    """
    High-accuracy solution of the spatially constant limit u' = u - u³ - 3C₀u.

    Used to audit the k = 0 mode of constant initial data.
    """

    def rhs(_: float, y: FloatArray) -> FloatArray:
        return y - y**3 - 3.0 * c_zero * y

    result = solve_ivp(
        rhs,
        (0.0, float(times[-1])),
        [u0],
        t_eval=times,
        method="DOP853",
        rtol=1e-12,
        atol=1e-14,
    )
    if not result.success:
        raise SolverDivergence(f"scalar oracle failed: {result.message}")
    return np.asarray(result.y[0])


@dataclass(frozen=True)
class DtAudit:
    """Max-over-time L² discrepancies between successive step refinements."""

    dts: tuple[float, ...]
    discrepancies: tuple[float, ...]
    oracle_error: Optional[float] = None

    @property
    def ratio(self) -> float:
        """Shrink factor of the discrepancy for one halving of dt."""
        first, second = self.discrepancies[0], self.discrepancies[1]
        return first / second if second > 0 else float("inf")


def step_dt_audit(
    spec: ModelSpec,
    config: SolveConfig,
    problem: str = "limit",
    nonlinear: bool = True,
) -> DtAudit:
    """
    Rerun a deterministic solve at dt, dt/2 and dt/4 and compare.

    Args:
        spec: Model (and C₀ for the limit problem)
        config: Coarsest time grid
        problem: "limit" for the renormalized limit, "model" for the ε-model
        nonlinear: Set False for the linear-only flow

    Returns:
        DtAudit whose ``ratio`` is about 2 for first-order schemes; for
        spatially constant limit data the k=0 mode is also compared against
        an adaptive scalar ODE solution
    """
    if problem not in ("limit", "model"):
        raise ConfigurationError(f"unknown audit problem {problem!r}")
    solve = solve_limit if problem == "limit" else solve_deterministic
    configs = [config, config.refined(2), config.refined(4)]
    runs = [solve(spec, c, nonlinear=nonlinear) for c in configs]
    discrepancies = tuple(
        float(np.max(coarse.combine(fine, -1.0, "diff").l2))
        for coarse, fine in zip(runs, runs[1:])
    )
    oracle_error = None
    grid = config.initial.grid
    if problem == "limit" and nonlinear:
        rest = config.initial.coeffs.copy()
        rest[0, 0] = 0.0
        if not np.any(rest):
            oracle = scalar_limit_oracle(
                config.initial.coeffs[0, 0].real, spec.require_c_zero(), config.times
            )
            finest = runs[-1].coeffs[:, 0, 0].real
            oracle_error = float(np.max(np.abs(finest - oracle)))
    logger.info(
        f"dt audit on n={grid.n}: discrepancies "
        + ", ".join(f"{d:.3e}" for d in discrepancies)
    )
    return DtAudit(tuple(c.dt for c in configs), discrepancies, oracle_error)
