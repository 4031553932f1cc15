"""
Stochastic convolution by exact per-mode Ornstein-Uhlenbeck recursion.

Each Fourier mode k carries I_k(t) = ∫₀ᵗ e^{-(t-s)λ_k} dβ_k(s) for a complex
Brownian motion with β_{-k} = conj(β_k); Z_ε has coefficients α_k·I_k.
Gaussian draws come from counter-based Philox streams keyed on
(master seed, sample, step), so a path is a pure function of its seed and
does not depend on the model or ε being simulated.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import ConfigurationError
from .models import ModelSpec, spectral_symbols
from .spectral import ComplexArray, FloatArray, FourierGrid, SpectralField
from .trajectory import Trajectory, snapshot_times

logger = logging.getLogger(__name__)

MAX_SEED = 2**64 - 1

Value = Union[complex, ComplexArray]


@dataclass(frozen=True)
class NoiseSeed:
    """Identifies one Monte Carlo sample of the noise."""

    master: int
    sample: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.master <= MAX_SEED:
            raise ConfigurationError(
                f"master seed must be a 64-bit value: {self.master}"
            )
        if self.sample < 0:
            raise ConfigurationError(f"sample index must be >= 0: {self.sample}")

    def generator(self, step: int) -> np.random.Generator:
        """Independent stream for one (sample, step) pair."""
        sequence = np.random.SeedSequence(self.master, spawn_key=(self.sample, step))
        return np.random.Generator(np.random.Philox(sequence))


def _check_rates(lam: NDArray[np.float64], h: float) -> None:
    if not h > 0:
        raise ConfigurationError(f"time increment must be positive, got {h}")
    if np.any(lam < 0):
        raise ConfigurationError("OU rates must be >= 0")


def ou_marginal_variance(lam: ArrayLike, t: float) -> Union[float, FloatArray]:
    """Var I(t) = (1 - e^{-2λt})/(2λ), and t when λ = 0."""
    lam = np.asarray(lam, dtype=np.float64)
    if t == 0:
        var = np.zeros_like(lam)
    else:
        _check_rates(lam, t)
        safe = np.where(lam > 0, lam, 1.0)
        var = np.where(lam > 0, -np.expm1(-2.0 * safe * t) / (2.0 * safe), t)
    return var if var.ndim else float(var)


def ou_coefficients(lam: ArrayLike, h: float) -> tuple[FloatArray, FloatArray]:
    """Decay factor e^{-λh} and injection scale s for one exact OU step."""
    lam = np.asarray(lam, dtype=np.float64)
    _check_rates(lam, h)
    decay = np.exp(-lam * h)
    scale = np.sqrt(np.asarray(ou_marginal_variance(lam, h)))
    return decay, scale


def ou_step(i_prev: Value, lam: ArrayLike, h: float, draw: Value) -> Value:
    """
    Advance I by h exactly.

    Args:
        i_prev: Current value(s) of I
        lam: Rate(s) λ ≥ 0
        h: Time increment, > 0
        draw: Standard complex Gaussian(s), real and imaginary parts N(0, 1/2)

    Returns:
        e^{-λh}·I + s·draw with s² = (1 - e^{-2λh})/(2λ), or h for λ = 0
    """
    decay, scale = ou_coefficients(lam, h)
    out = decay * np.asarray(i_prev) + scale * np.asarray(draw)
    return out if np.ndim(out) else complex(out)


def _partner_index(grid: FourierGrid) -> tuple[NDArray[np.int64], NDArray[np.int64]]:
    flat = np.arange(grid.n * grid.n).reshape(grid.n, grid.n)
    return flat, grid.reflect(flat)


def increments_for(seed: NoiseSeed, step: int, grid: FourierGrid) -> ComplexArray:
    """
    Complex Gaussian draws for every mode of one step, β_{-k} = conj(β_k).

    A draw is taken for each mode of the full lattice in fixed order; modes
    whose flat index exceeds their partner's are overwritten by the partner's
    conjugate and self-conjugate modes (k = 0 and the Nyquist corners) get a
    real unit-variance value.
    """
    rng = seed.generator(step)
    n = grid.n
    draws = rng.standard_normal((2, n, n))
    w = (draws[0] + 1j * draws[1]) * math.sqrt(0.5)
    flat, partner = _partner_index(grid)
    out = np.where(flat < partner, w, np.conj(grid.reflect(w)))
    self_conjugate = flat == partner
    out[self_conjugate] = draws[0][self_conjugate]
    return out


@dataclass
class OUState:
    """Per-mode OU integrals of one sample, advanced in place."""

    grid: FourierGrid
    lam: FloatArray
    alpha: FloatArray
    t: float = 0.0
    values: ComplexArray = field(init=False)
    _coefficients: dict[float, tuple[FloatArray, FloatArray]] = field(
        init=False, default_factory=dict, repr=False
    )

    def __post_init__(self) -> None:
        self.values = np.zeros((self.grid.n, self.grid.n), dtype=np.complex128)

    @classmethod
    def start(cls, spec: ModelSpec, grid: FourierGrid) -> OUState:
        symbols = spectral_symbols(spec, grid)
        return cls(grid, symbols.lam, symbols.alpha)

    def advance(self, h: float, draws: ComplexArray) -> None:
        if h not in self._coefficients:
            self._coefficients[h] = ou_coefficients(self.lam, h)
        decay, scale = self._coefficients[h]
        self.values = decay * self.values + scale * draws
        self.t += h

    def z(self) -> SpectralField:
        """Current Z_ε = Σ α_k I_k e_k."""
        return SpectralField(self.grid, self.alpha * self.values)


def sample_z_path(
    spec: ModelSpec,
    grid: FourierGrid,
    T: float,
    steps: int,
    seed: NoiseSeed,
    save_every: int = 1,
) -> Trajectory:
    """
    Sample Z_ε at t_j = jT/steps, storing every ``save_every``-th snapshot.

    Returns:
        Trajectory of Z_ε starting from Z_ε(0) = 0
    """
    times = snapshot_times(T, steps, save_every)
    h = T / steps
    state = OUState.start(spec, grid)
    snapshots = [state.z().coeffs]
    for step in range(steps):
        state.advance(h, increments_for(seed, step, grid))
        if (step + 1) % save_every == 0:
            snapshots.append(state.z().coeffs)
    logger.debug(f"Sampled Z for {spec.label()} sample {seed.sample}, {steps} steps")
    return Trajectory(
        grid,
        times,
        np.stack(snapshots),
        label=f"Z {spec.label()}",
        meta={"master_seed": seed.master, "sample": seed.sample},
    )
