"""
Renormalization constants, Wick squares and lattice series.

C_ε = Σ_{k≠0} α_k²/(2λ_k(ε)) is slowly divergent in the cutoff, so lattice
sums run over an eighth of the lattice (0 ≤ k2 ≤ k1) with per-shell
pairwise sums combined by ``math.fsum``; ``c_eps_direct`` repeats the sum
row by row over the full square as an independent summation order.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .analysis import time_integral
from .errors import ConfigurationError
from .models import (
    Model,
    ModelSpec,
    Mollifier,
    SigmaSchedule,
    lambda_k,
    mollifier_symbol,
    spectral_symbols,
)
from .noise import NoiseSeed, ou_marginal_variance, sample_z_path
from .parallel import run_tasks
from .spectral import (
    FloatArray,
    FourierGrid,
    SpectralField,
    dealiased_square,
    from_padded_physical,
    sobolev_weight,
    to_padded_physical,
    weighted_norm_sq,
)
from .timing import timed, timed_operation

logger = logging.getLogger(__name__)

DEFAULT_TAIL_TOLERANCE = 1e-4
PILOT_CUTOFF = 64
SHELL_BLOCK = 256


@dataclass(frozen=True)
class SeriesTerms:
    """
    Summand scale·q(μ)²·μ^{power}/λ_k(ε) of a lattice series over k ≠ 0.

    With ``limit`` set the ε-independent λ_k = μ_k is used instead.
    """

    model: Model
    eps: float
    scale: float = 1.0
    power: float = 0.0
    mollifier: Mollifier = Mollifier.NONE
    limit: bool = False

    def __call__(self, mu: FloatArray) -> FloatArray:
        lam = mu if self.limit else np.asarray(lambda_k(self.model, self.eps, mu))
        terms = self.scale / lam
        if self.power:
            terms = terms * mu**self.power
        if self.mollifier is not Mollifier.NONE:
            q = np.asarray(mollifier_symbol(self.mollifier, self.eps, mu))
            terms = terms * q**2
        return terms

    def shell_sums(self, bounds: tuple[int, int]) -> list[float]:
        """Sums over the shells max(|k1|, |k2|) = a for a in [start, stop)."""
        start, stop = bounds
        sums = []
        for a in range(start, stop):
            b = np.arange(a + 1, dtype=np.float64)
            multiplicity = np.full(a + 1, 8.0)
            multiplicity[0] = 4.0
            multiplicity[-1] = 4.0
            values = self(a * a + b * b)
            sums.append(float(np.sum(multiplicity * values)))
        return sums


def _series_terms(spec: ModelSpec, power: float = 0.0) -> SeriesTerms:
    return SeriesTerms(spec.model, spec.eps, 1.0, power, spec.mollifier)


def lattice_series(terms: SeriesTerms, cutoff: int, workers: int = 1) -> float:
    """Σ terms(μ_k) over 0 < max(|k1|, |k2|) ≤ cutoff."""
    if cutoff < 1:
        raise ConfigurationError(f"cutoff must be >= 1, got {cutoff}")
    blocks = [
        (start, min(start + SHELL_BLOCK, cutoff + 1))
        for start in range(1, cutoff + 1, SHELL_BLOCK)
    ]
    shells = run_tasks(terms.shell_sums, blocks, workers)
    return math.fsum(s for block in shells for s in block)


def c_eps(spec: ModelSpec, cutoff: int, workers: int = 1) -> float:
    """
    C_ε over all modes with 0 < max(|k1|, |k2|) ≤ cutoff.

    Args:
        spec: Model, ε and σ_ε (mollified noise enters through α_k²)
        cutoff: K ≥ 1
        workers: Processes for the shell sums

    Returns:
        Σ α_k²/(2λ_k(ε))
    """
    terms = _series_terms(spec)
    return spec.sigma**2 / 2.0 * lattice_series(terms, cutoff, workers)


def c_eps_direct(spec: ModelSpec, cutoff: int) -> float:
    """Same sum as :func:`c_eps`, accumulated row by row over the full square."""
    if cutoff < 1:
        raise ConfigurationError(f"cutoff must be >= 1, got {cutoff}")
    terms = _series_terms(spec)
    k2 = np.arange(-cutoff, cutoff + 1, dtype=np.float64)
    rows = []
    for k1 in range(-cutoff, cutoff + 1):
        mu = k1 * k1 + k2 * k2
        if k1 == 0:
            mu = mu[k2 != 0]
        rows.append(math.fsum(terms(mu)))
    return spec.sigma**2 / 2.0 * math.fsum(rows)


def c_eps_grid(spec: ModelSpec, grid: FourierGrid) -> float:
    """C_ε over exactly the simulation's dealias-retained nonzero modes."""
    symbols = spectral_symbols(spec, grid)
    mask = grid.nonzero_mask
    return math.fsum(symbols.alpha[mask] ** 2 / (2.0 * symbols.lam[mask]))


def _tail_bound(spec: ModelSpec, radius: float, power: float = 0.0) -> float:
    """Upper bound of Σ_{max|k| > radius+1} μ^{power}·q²/λ for the unit series."""
    if spec.model is Model.AC_MOLLIFIED_NOISE:
        if spec.mollifier is Mollifier.SHARP_CUTOFF:
            return 0.0 if radius >= 1.0 / spec.eps else math.inf
        if power:
            raise ConfigurationError("weighted series diverge for mollified noise")
        x = spec.eps**2 * radius**2
        return math.pi * math.exp(-x) / x
    eps_eff = spec.eps if spec.model is Model.CH_AC_HOMOTOPY else spec.eps**2
    delta = 2.0 * power
    return 2.0 * math.pi * radius ** (delta - 2.0) / ((2.0 - delta) * eps_eff)


def cutoff_for(
    spec: ModelSpec,
    rel_tol: float = DEFAULT_TAIL_TOLERANCE,
    power: float = 0.0,
    max_cutoff: int = 50_000,
) -> int:
    """
    Cutoff K whose analytic tail bound is below rel_tol of the series.

    The series at a pilot cutoff is a lower bound of the full sum, so the
    tail criterion is conservative. The homotopy tail uses λ_k ≥ εμ_k², the
    bilaplacian one λ_k ≥ ε²μ_k².
    """
    if not 0 < rel_tol < 1:
        raise ConfigurationError(f"rel_tol must be in (0, 1), got {rel_tol}")
    if not 0 <= power < 1:
        raise ConfigurationError(f"series weight μ^{power} needs 0 <= power < 1")
    if spec.mollifier is Mollifier.SHARP_CUTOFF:
        return max(1, math.ceil(1.0 / spec.eps))
    pilot = lattice_series(_series_terms(spec, power), PILOT_CUTOFF)
    target = rel_tol * pilot
    radius = float(PILOT_CUTOFF)
    while _tail_bound(spec, radius, power) >= target:
        radius *= 1.05
        if radius > max_cutoff:
            raise ConfigurationError(
                f"no cutoff below {max_cutoff} meets rel_tol={rel_tol} "
                f"for {spec.label()}"
            )
    cutoff = math.ceil(radius) + 1
    logger.debug(f"Cutoff K={cutoff} for {spec.label()} at rel_tol={rel_tol}")
    return cutoff


@dataclass(frozen=True)
class CZeroEstimate:
    """
    C₀ from a decreasing ε grid, with the sequence that certifies it.

    ``value`` is the extrapolation C_ε ≈ C₀ + b/log(1/ε) fitted to the
    grid values; for non-logarithmic schedules the values are empty and the
    value is 0 ("zero") or infinite ("divergent").
    """

    regime: str
    value: float
    eps: tuple[float, ...] = ()
    values: tuple[float, ...] = ()
    differences: tuple[float, ...] = ()
    cutoffs: tuple[int, ...] = ()

    @property
    def label(self) -> str:
        return {"zero": "C0=0", "finite": "C0 finite", "divergent": "C0 divergent"}[
            self.regime
        ]

    @property
    def converging(self) -> bool:
        """Whether successive differences shrink along the grid."""
        d = self.differences
        return all(later < earlier for earlier, later in zip(d, d[1:]))

    def to_dict(self) -> dict[str, object]:
        return {
            "regime": self.regime,
            "label": self.label,
            "value": self.value,
            "eps": list(self.eps),
            "values": list(self.values),
            "differences": list(self.differences),
            "cutoffs": list(self.cutoffs),
        }


@timed("C0 estimate")
def c_zero_estimate(
    schedule: SigmaSchedule,
    eps_grid: Sequence[float],
    model: Model = Model.CH_AC_HOMOTOPY,
    rel_tol: float = DEFAULT_TAIL_TOLERANCE,
    workers: int = 1,
) -> CZeroEstimate:
    """
    Estimate C₀ = lim σ_ε² Σ_{k≠0} 1/(2λ_k(ε)) along a decreasing ε grid.

    Schedules whose σ_ε²·log(1/ε) tends to 0 or ∞ return the trivial limit
    with the matching regime tag and no series evaluation.
    """
    regime = schedule.regime
    if regime == "zero":
        return CZeroEstimate(regime, 0.0)
    if regime == "divergent":
        return CZeroEstimate(regime, math.inf)
    if model is Model.AC_MOLLIFIED_NOISE:
        raise ConfigurationError("C0 estimates need white-noise models")
    grid_eps = tuple(sorted(eps_grid, reverse=True))
    if not grid_eps:
        raise ConfigurationError("eps grid is empty")
    values, cutoffs = [], []
    for eps in grid_eps:
        spec = ModelSpec.from_schedule(model, eps, schedule)
        cutoff = cutoff_for(spec, rel_tol)
        cutoffs.append(cutoff)
        values.append(c_eps(spec, cutoff, workers))
        logger.info(f"C_eps({eps:g}) = {values[-1]:.6f} with K={cutoff}")
    differences = tuple(abs(b - a) for a, b in zip(values, values[1:]))
    if len(values) >= 2:
        inv_log = [1.0 / math.log(1.0 / e) for e in grid_eps]
        _, intercept = np.polyfit(inv_log, values, 1)
        value = max(float(intercept), 0.0)
    else:
        value = values[0]
    return CZeroEstimate(
        regime, value, grid_eps, tuple(values), differences, tuple(cutoffs)
    )


def wick_square(z: SpectralField, c: float) -> SpectralField:
    """Dealiased z² with the constant c removed from the k = 0 coefficient."""
    square = dealiased_square(z)
    coeffs = square.coeffs.copy()
    coeffs[0, 0] -= c
    return SpectralField(z.grid, coeffs)


@dataclass(frozen=True)
class SeriesAsymptotics:
    """Measured ε-dependence of Σ_{k≠0} μ_k^{δ/2}/λ_k(ε)."""

    model: Model
    delta: float
    eps: tuple[float, ...]
    sums: tuple[float, ...]
    cutoffs: tuple[int, ...]
    ratios_to_log: tuple[float, ...]
    slope_vs_eps: float
    slope_vs_log: float

    @property
    def relative_spread(self) -> float:
        """(max - min)/mean of the ratios to log(1/ε)."""
        r = np.asarray(self.ratios_to_log)
        return float((r.max() - r.min()) / r.mean())

    def to_dict(self) -> dict[str, object]:
        return {
            "model": self.model.value,
            "delta": self.delta,
            "eps": list(self.eps),
            "sums": list(self.sums),
            "cutoffs": list(self.cutoffs),
            "ratios_to_log": list(self.ratios_to_log),
            "relative_spread": self.relative_spread,
            "slope_vs_eps": self.slope_vs_eps,
            "slope_vs_log": self.slope_vs_log,
        }


@timed("series asymptotics")
def series_asymptotics(
    model: Model,
    eps_grid: Sequence[float],
    delta: float = 0.0,
    rel_tol: float = DEFAULT_TAIL_TOLERANCE,
    workers: int = 1,
) -> SeriesAsymptotics:
    """
    Evaluate Σ_{k≠0} μ_k^{δ/2}/λ_k(ε) with tail-tight cutoffs along ε.

    Reports log-log slopes against ε and against log(1/ε), and for every ε
    the ratio of the sum to log(1/ε).
    """
    if model is Model.AC_MOLLIFIED_NOISE:
        raise ConfigurationError("series asymptotics need an ε-regularized operator")
    if not 0 <= delta < 2:
        raise ConfigurationError(f"delta must be in [0, 2), got {delta}")
    grid_eps = tuple(sorted(eps_grid, reverse=True))
    if len(grid_eps) < 2:
        raise ConfigurationError("series asymptotics need at least two eps values")
    power = delta / 2.0
    sums, cutoffs = [], []
    for eps in grid_eps:
        spec = ModelSpec(model, eps, 1.0)
        cutoff = cutoff_for(spec, rel_tol, power)
        cutoffs.append(cutoff)
        sums.append(lattice_series(_series_terms(spec, power), cutoff, workers))
    logs = np.log(1.0 / np.asarray(grid_eps))
    log_sums = np.log(np.asarray(sums))
    return SeriesAsymptotics(
        model=model,
        delta=delta,
        eps=grid_eps,
        sums=tuple(sums),
        cutoffs=tuple(cutoffs),
        ratios_to_log=tuple(float(s / l) for s, l in zip(sums, logs)),
        slope_vs_eps=float(np.polyfit(np.log(grid_eps), log_sums, 1)[0]),
        slope_vs_log=float(np.polyfit(np.log(logs), log_sums, 1)[0]),
    )


def wick_series_bound(spec: ModelSpec, cutoff: int, limit: bool = False) -> float:
    """
    Σ_{0<max|k|≤K} μ_k^{-1} Σ_{ℓ≠0,k} 1/(λ_ℓ λ_{k-ℓ}).

    The inner sum is a lattice autoconvolution of 1/λ truncated at 4K,
    evaluated with zero-padded FFTs. With ``limit`` set λ = μ (the ε = 0
    value, an upper bound for every ε).
    """
    if cutoff < 1:
        raise ConfigurationError(f"cutoff must be >= 1, got {cutoff}")
    inner = 4 * cutoff
    k = np.arange(-inner, inner + 1, dtype=np.float64)
    k1, k2 = np.meshgrid(k, k, indexing="ij")
    mu = k1**2 + k2**2
    g = np.zeros_like(mu)
    nonzero = mu > 0
    terms = SeriesTerms(spec.model, spec.eps, limit=limit)
    g[nonzero] = terms(mu[nonzero])
    size = 2 * g.shape[0] - 1
    spectrum = np.fft.rfft2(g, s=(size, size))
    conv = np.fft.irfft2(spectrum * spectrum, s=(size, size))
    centre = 2 * inner
    outer = np.arange(-cutoff, cutoff + 1)
    o1, o2 = np.meshgrid(outer, outer, indexing="ij")
    mu_outer = (o1**2 + o2**2).astype(np.float64)
    keep = mu_outer > 0
    values = conv[centre + o1, centre + o2][keep] / mu_outer[keep]
    return math.fsum(values)


def expected_norm_sq(
    spec: ModelSpec, grid: FourierGrid, t: float, s: float = 0.0
) -> float:
    """
    E‖Z_ε(t)‖²_{H^s} = Σ_k (1+μ_k)^s α_k² Var I_k(t).

    The k = 0 Brownian mode is included when the model spec simulates it.
    """
    symbols = spectral_symbols(spec, grid)
    variance = np.asarray(ou_marginal_variance(symbols.lam, t))
    terms = sobolev_weight(grid, s) * symbols.alpha**2 * variance
    return math.fsum(terms.ravel())


def grid_centering(spec: ModelSpec, grid: FourierGrid, t: float) -> float:
    """Exact mean of the spatial average of Z_ε(t)² on the grid."""
    return expected_norm_sq(spec, grid, t, 0.0)


@dataclass(frozen=True)
class WickSample:
    eps: float
    sample: int
    centered_grid: float
    centered_c0: float
    cube: float
    mean_square_T: float


@dataclass(frozen=True)
class WickTask:
    spec: ModelSpec
    n: int
    T: float
    steps: int
    seed: NoiseSeed
    c_zero: float
    save_every: int = 1


def wick_sample(task: WickTask) -> WickSample:
    """Functionals of one Z_ε path for the Wick convergence study."""
    grid = FourierGrid(task.n)
    z = sample_z_path(task.spec, grid, task.T, task.steps, task.seed, task.save_every)
    weight = sobolev_weight(grid, -1.0)
    zp = to_padded_physical(z.coeffs, grid)
    square = from_padded_physical(zp**2, grid)
    cube = from_padded_physical(zp**3, grid)
    centering = np.array([grid_centering(task.spec, grid, t) for t in z.times])

    def integral(coeffs: np.ndarray) -> float:
        return time_integral(weighted_norm_sq(coeffs, weight), z.T)

    grid_centered = square.copy()
    grid_centered[:, 0, 0] -= centering
    c0_centered = square.copy()
    c0_centered[:, 0, 0] -= task.c_zero
    return WickSample(
        eps=task.spec.eps,
        sample=task.seed.sample,
        centered_grid=integral(grid_centered),
        centered_c0=integral(c0_centered),
        cube=integral(cube),
        mean_square_T=float(square[-1, 0, 0].real),
    )


@dataclass(frozen=True)
class MeanEstimate:
    mean: float
    stderr: float

    @classmethod
    def of(cls, values: Sequence[float]) -> MeanEstimate:
        data = np.asarray(values, dtype=np.float64)
        if data.size < 2:
            return cls(float(data.mean()), 0.0)
        return cls(float(data.mean()), float(data.std(ddof=1) / math.sqrt(data.size)))


@dataclass(frozen=True)
class WickStatistics:
    """Monte Carlo moments for one ε of the Wick convergence study."""

    eps: float
    sigma: float
    samples: int
    c_zero: float
    centered_grid: MeanEstimate
    centered_c0: MeanEstimate
    cube: MeanEstimate
    mean_square_T: MeanEstimate
    exact_mean_square_T: float
    records: tuple[WickSample, ...] = field(default=(), repr=False)

    def to_dict(self) -> dict[str, object]:
        def pair(m: MeanEstimate) -> dict[str, float]:
            return {"mean": m.mean, "stderr": m.stderr}

        return {
            "eps": self.eps,
            "sigma": self.sigma,
            "samples": self.samples,
            "c_zero": self.c_zero,
            "wick_grid": pair(self.centered_grid),
            "wick_c0": pair(self.centered_c0),
            "cube": pair(self.cube),
            "mean_square_T": pair(self.mean_square_T),
            "exact_mean_square_T": self.exact_mean_square_T,
        }


def wick_convergence_study(
    specs: Sequence[ModelSpec],
    n: int,
    T: float,
    steps: int,
    samples: int,
    master_seed: int,
    c_zero: Optional[float] = None,
    save_every: int = 1,
    workers: int = 1,
) -> list[WickStatistics]:
    """
    Monte Carlo E‖Z_ε² - C‖² and E‖Z_ε³‖² in L²([0,T], H^{-1}).

    C is either the exact finite-time grid mean Σ α_k² Var I_k(t) or the
    constant C₀ (taken from each spec when ``c_zero`` is None). Sample i
    uses the same noise draws for every ε.
    """
    if samples < 1:
        raise ConfigurationError(f"samples must be >= 1, got {samples}")
    grid = FourierGrid(n)
    tasks = [
        WickTask(
            spec,
            n,
            T,
            steps,
            NoiseSeed(master_seed, i),
            c_zero if c_zero is not None else spec.require_c_zero(),
            save_every,
        )
        for spec in specs
        for i in range(samples)
    ]
    with timed_operation(f"Wick study over {len(specs)} eps values"):
        results = run_tasks(wick_sample, tasks, workers)
    stats = []
    for j, spec in enumerate(specs):
        chunk = results[j * samples : (j + 1) * samples]
        stats.append(
            WickStatistics(
                eps=spec.eps,
                sigma=spec.sigma,
                samples=samples,
                c_zero=tasks[j * samples].c_zero,
                centered_grid=MeanEstimate.of([r.centered_grid for r in chunk]),
                centered_c0=MeanEstimate.of([r.centered_c0 for r in chunk]),
                cube=MeanEstimate.of([r.cube for r in chunk]),
                mean_square_T=MeanEstimate.of([r.mean_square_T for r in chunk]),
                exact_mean_square_T=grid_centering(spec, grid, T),
                records=tuple(chunk),
            )
        )
    return stats
