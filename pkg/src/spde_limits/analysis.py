"""
Norms and residual budgets.

Spatial norms are weighted coefficient sums under the unitary transform
convention; time norms use left-endpoint quadrature on the stored snapshot
grid. Residual terms are measured in the ε-dependent dual norm V_ε′, whose
weight is 1/(1 + λ_k(ε)).
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from typing import Mapping, Optional, Sequence, Union

import numpy as np
from numpy.typing import ArrayLike

from .errors import ConfigurationError
from .models import Model, ModelSpec, cubic, spectral_symbols
from .spectral import (
    FloatArray,
    FourierGrid,
    SpectralField,
    dealiased_product,
    from_padded_physical,
    sobolev_weight,
    to_padded_physical,
    to_physical,
    weighted_norm_sq,
)
from .trajectory import Trajectory

logger = logging.getLogger(__name__)

DEFAULT_TIME_EXPONENT = 4.0


def sobolev_norm(field: SpectralField, s: float) -> float:
    """(Σ_k (1+μ_k)^s |w_k|²)^{1/2}."""
    return math.sqrt(
        float(weighted_norm_sq(field.coeffs, sobolev_weight(field.grid, s)))
    )


def l2_norm(field: SpectralField) -> float:
    return sobolev_norm(field, 0.0)


def v_eps_dual_norm(field: SpectralField, spec: ModelSpec) -> float:
    """(Σ_k |w_k|²/(1 + λ_k(ε)))^{1/2}."""
    weight = spectral_symbols(spec, field.grid).dual_weight
    return math.sqrt(float(weighted_norm_sq(field.coeffs, weight)))


def v_eps_norm(field: SpectralField, spec: ModelSpec) -> float:
    """(Σ_k (1 + λ_k(ε))|w_k|²)^{1/2}, i.e. ‖φ‖² - ⟨A_εφ, φ⟩."""
    weight = spectral_symbols(spec, field.grid).weight
    return math.sqrt(float(weighted_norm_sq(field.coeffs, weight)))


def sup_norm(field: SpectralField) -> float:
    """Grid maximum of |w|, the discrete stand-in for the C⁰ norm."""
    return float(np.max(np.abs(to_physical(field.coeffs, field.grid))))


def lp_norm(field: SpectralField, p: float) -> float:
    """Spatial L^p norm with the normalized torus measure (grid mean)."""
    if p < 1:
        raise ConfigurationError(f"p must be >= 1, got {p}")
    values = np.abs(to_physical(field.coeffs, field.grid))
    if math.isinf(p):
        return float(np.max(values))
    return float(np.mean(values**p) ** (1.0 / p))


def lp_time_norm(values: ArrayLike, p: float, T: float) -> float:
    """
    L^p([0, T]) norm of a sampled nonnegative function of time.

    Args:
        values: Samples at t_j = jT/(J-1), j = 0..J-1
        p: Exponent ≥ 1, or ``math.inf`` for the maximum
        T: Horizon

    Returns:
        (Σ_{j<J-1} dt·values_j^p)^{1/p} with dt = T/(J-1)
    """
    if p < 1:
        raise ConfigurationError(f"time exponent p must be >= 1, got {p}")
    samples = np.asarray(values, dtype=np.float64)
    if math.isinf(p):
        return float(np.max(samples))
    if samples.size < 2:
        raise ConfigurationError("L^p time norms need at least two snapshots")
    dt = T / (samples.size - 1)
    return float((dt * np.sum(samples[:-1] ** p)) ** (1.0 / p))


def time_integral(values: ArrayLike, T: float) -> float:
    """Left-endpoint ∫₀ᵀ of a sampled nonnegative integrand."""
    return lp_time_norm(values, 1.0, T)


def dual_norm_constant(spec: ModelSpec, grid: FourierGrid) -> float:
    """Grid value of C in ‖w‖_{V_ε′} ≤ C‖w‖_{H^{-1}}."""
    weight = spectral_symbols(spec, grid).weight
    return float(np.sqrt(np.max((1.0 + grid.mu) / weight)))


def operator_bound_value(eps: float, mu: ArrayLike) -> float:
    """Norm of 1+Δ into V_ε′: max over μ ≥ 1 of |1-μ|/√((1+μ)(1-ε+εμ))."""
    mu = np.asarray(mu, dtype=np.float64)
    mu = mu[mu >= 1.0]
    ratio = np.abs(1.0 - mu) / np.sqrt((1.0 + mu) * (1.0 - eps + eps * mu))
    return float(np.max(ratio)) if ratio.size else 0.0


def operator_bound_check(spec: ModelSpec, grid: FourierGrid) -> float:
    """
    Grid value of ‖1+Δ‖_{L(L², V_ε′)} for the homotopy model.

    Bounded by 2ε^{-1/2}.
    """
    if spec.model is not Model.CH_AC_HOMOTOPY:
        raise ConfigurationError(
            f"operator bound applies to {Model.CH_AC_HOMOTOPY.value} only"
        )
    return operator_bound_value(spec.eps, grid.mu)


def product_bound_ratio(v: SpectralField, w: SpectralField) -> float:
    """‖vw‖_{H^{-1}} / (‖v‖_{H^{-1}}·‖w‖_{H²}) for the product lemma."""
    denominator = sobolev_norm(v, -1.0) * sobolev_norm(w, 2.0)
    if denominator == 0.0:
        raise ConfigurationError("product bound needs two nonzero factors")
    return sobolev_norm(dealiased_product(v, w), -1.0) / denominator


@dataclass(frozen=True, eq=False)
class NormReport:
    """Per-snapshot norms of one trajectory and their time aggregates."""

    times: FloatArray
    l2: FloatArray
    h_minus1: FloatArray
    v_dual: FloatArray
    sup: FloatArray
    p: float
    sup_l2: float
    dual_sq_integral: float
    lp_h_minus1: float
    sup_c0: float

    def summary(self) -> dict[str, float]:
        return {
            "sup_l2": self.sup_l2,
            "dual_sq_integral": self.dual_sq_integral,
            "lp_h_minus1": self.lp_h_minus1,
            "sup_c0": self.sup_c0,
            "p": self.p,
        }


def norm_report(
    traj: Trajectory, spec: ModelSpec, p: float = DEFAULT_TIME_EXPONENT
) -> NormReport:
    dual = np.sqrt(
        weighted_norm_sq(traj.coeffs, spectral_symbols(spec, traj.grid).dual_weight)
    )
    return NormReport(
        times=traj.times,
        l2=traj.l2,
        h_minus1=traj.h_minus1,
        v_dual=dual,
        sup=traj.sup,
        p=p,
        sup_l2=float(np.max(traj.l2)),
        dual_sq_integral=time_integral(dual**2, traj.T),
        lp_h_minus1=lp_time_norm(traj.h_minus1, p, traj.T),
        sup_c0=float(np.max(traj.sup)),
    )


def residual_symbol(spec: ModelSpec, grid: FourierGrid) -> FloatArray:
    """Mode-wise symbol of A - A_ε."""
    mu = grid.mu
    if spec.model is Model.CH_AC_HOMOTOPY:
        return spec.eps * (mu - 1.0) * mu
    if spec.model is Model.AC_BILAPLACIAN:
        return spec.eps**2 * mu**2
    return np.zeros_like(mu)


@dataclass(frozen=True)
class ResidualBreakdown:
    """Time-integrated V_ε′ budgets of the three residual terms."""

    term1: float
    term2: float
    term3: float
    total: float
    term3_parts: dict[str, float]

    def to_dict(self) -> dict[str, object]:
        return asdict(self)


TERM3_PARTS = ("z", "u2z", "u_wick", "z3")


def residual_breakdown(
    u_traj: Trajectory, z_traj: Trajectory, spec: ModelSpec
) -> ResidualBreakdown:
    """
    Residual of the limit solution u inserted into the transformed ε-equation.

    term1 measures (A - A_ε)u, term2 the nonlinearity mismatch
    F(u+Z) - F_ε(u+Z) (zero unless the nonlinearity carries a multiplier),
    and term3 the renormalization defect
    F(u+Z) - G(u) = Z - 3u²Z - 3u(Z² - C₀) - Z³, all as ∫‖·‖²_{V_ε′}dt.
    The four pieces of term3 are also reported as ∫‖·‖²_{H^{-1}}dt.

    Raises:
        GridMismatchError: If the trajectories use different time grids
        ConfigurationError: If the model spec carries no C₀
    """
    u_traj.check_compatible(z_traj)
    c_zero = spec.require_c_zero()
    grid, T = u_traj.grid, u_traj.T
    symbols = spectral_symbols(spec, grid)
    dual = symbols.dual_weight
    h_minus1 = sobolev_weight(grid, -1.0)
    u, z = u_traj.coeffs, z_traj.coeffs

    r1 = u * residual_symbol(spec, grid)

    up = to_padded_physical(u, grid)
    zp = to_padded_physical(z, grid)
    if spec.model is Model.CH_AC_HOMOTOPY:
        f_sum = from_padded_physical(np.asarray(cubic(up + zp)), grid)
        r2 = f_sum * (1.0 - symbols.nonlinear)
    else:
        r2 = np.zeros_like(u)

    pieces = {
        "z": from_padded_physical(zp, grid),
        "u2z": from_padded_physical(-3.0 * up**2 * zp, grid),
        "u_wick": from_padded_physical(-3.0 * up * (zp**2 - c_zero), grid),
        "z3": from_padded_physical(-(zp**3), grid),
    }
    r3 = sum(pieces.values())

    def budget(coeffs: np.ndarray, weight: Union[FloatArray, float]) -> float:
        return time_integral(weighted_norm_sq(coeffs, weight), T)

    breakdown = ResidualBreakdown(
        term1=budget(r1, dual),
        term2=budget(r2, dual),
        term3=budget(r3, dual),
        total=budget(r1 + r2 + r3, dual),
        term3_parts={name: budget(pieces[name], h_minus1) for name in TERM3_PARTS},
    )
    logger.debug(f"Residual for {spec.label()}: {breakdown}")
    return breakdown


def gamma_floor(spec: ModelSpec) -> float:
    """Smallest admissible event threshold γ for the model."""
    if spec.model is Model.CH_AC_HOMOTOPY:
        return math.sqrt(spec.eps)
    if spec.model is Model.AC_BILAPLACIAN:
        return spec.eps
    return 0.0


CONVOLUTION_EVENTS = ("sup_c0", "wick_lp", "z_lp", "z3_l2", "l6")


def convolution_statistics(
    z_traj: Trajectory, spec: ModelSpec, p: float = DEFAULT_TIME_EXPONENT
) -> dict[str, float]:
    """
    Path functionals of Z_ε that enter the residual-reduction events.

    Returns:
        sup_c0: ε^{1/4}·sup_t‖Z‖_{C⁰} (homotopy model, else 0)
        wick_lp: ‖Z² - C₀‖²_{L^p H^{-1}}
        z_lp: ‖Z‖²_{L^p H^{-1}}
        z3_l2: ‖Z³‖²_{L² H^{-1}}
        l6: ε^{1/2}‖Z‖⁶_{L⁶L⁶} (homotopy model, else 0)
    """
    c_zero = spec.require_c_zero()
    grid, T = z_traj.grid, z_traj.T
    h_minus1 = sobolev_weight(grid, -1.0)
    zp = to_padded_physical(z_traj.coeffs, grid)
    wick = np.sqrt(
        weighted_norm_sq(from_padded_physical(zp**2 - c_zero, grid), h_minus1)
    )
    cube = np.sqrt(weighted_norm_sq(from_padded_physical(zp**3, grid), h_minus1))
    homotopy = spec.model is Model.CH_AC_HOMOTOPY
    # grid-mean quadrature of Z⁶ on the padded grid; not alias-exact for degree 6
    l6_mean = np.mean(zp**6, axis=(-2, -1))
    return {
        "sup_c0": spec.eps**0.25 * float(np.max(z_traj.sup)) if homotopy else 0.0,
        "wick_lp": lp_time_norm(wick, p, T) ** 2,
        "z_lp": lp_time_norm(z_traj.h_minus1, p, T) ** 2,
        "z3_l2": lp_time_norm(cube, 2.0, T) ** 2,
        "l6": math.sqrt(spec.eps) * time_integral(l6_mean, T) if homotopy else 0.0,
    }


def convolution_events(
    z_traj: Trajectory,
    spec: ModelSpec,
    gamma: float,
    p: float = DEFAULT_TIME_EXPONENT,
    statistics: Optional[Mapping[str, float]] = None,
) -> dict[str, int]:
    """
    Indicators of the stochastic-convolution events at threshold γ.

    ``statistics`` takes the output of :func:`convolution_statistics` for the
    same path when the caller already has it.
    """
    if not gamma > 0:
        raise ConfigurationError(f"gamma must be positive, got {gamma}")
    if statistics is None:
        statistics = convolution_statistics(z_traj, spec, p)
    thresholds = {name: gamma for name in CONVOLUTION_EVENTS}
    thresholds["sup_c0"] = 0.5
    return {
        name: int(statistics[name] > thresholds[name]) for name in CONVOLUTION_EVENTS
    }


def eps_small_check(u_traj: Trajectory, spec: ModelSpec) -> bool:
    """c_ε·sup_t‖u‖_{C⁰} ≤ 1/2."""
    return spec.c_eps_threshold * float(np.max(u_traj.sup)) <= 0.5


def sup_error_sq(error: Trajectory) -> float:
    """sup_t‖u_ε - u - Z_ε‖²_{L²}."""
    return float(np.max(error.l2) ** 2)


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of log y against log x."""
    return float(np.polyfit(np.log(np.asarray(x)), np.log(np.asarray(y)), 1)[0])
