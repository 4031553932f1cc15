"""
Per-model spectral symbols.

Three ε-families share the cubic f(u) = u - u³ and differ in the linear
operator, the nonlinearity multiplier and the noise covariance:

- ``ch_ac_homotopy``: A_ε = (1-ε-εΔ)Δ, F_ε = (1-ε-εΔ)f, white noise.
- ``ac_bilaplacian``: A_ε = Δ - ε²Δ², F_ε = f, white noise.
- ``ac_mollified_noise``: A_ε = Δ, F_ε = f, noise smoothed by a mollifier.

All symbols are diagonal in the Fourier basis and are tabulated once per
(spec, grid) by :func:`spectral_symbols`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from functools import lru_cache
from typing import Optional, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import ConfigurationError
from .spectral import FourierGrid, SpectralField, dealiased_cube

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]
Scalar = Union[float, FloatArray]


class Model(str, Enum):
    CH_AC_HOMOTOPY = "ch_ac_homotopy"
    AC_BILAPLACIAN = "ac_bilaplacian"
    AC_MOLLIFIED_NOISE = "ac_mollified_noise"


class Mollifier(str, Enum):
    NONE = "none"
    EXPONENTIAL = "exponential"
    SHARP_CUTOFF = "sharp_cutoff"


class SigmaKind(str, Enum):
    CONSTANT = "constant"
    LOG_INVERSE = "log_inverse"
    LOG_INVERSE_SQRT = "log_inverse_sqrt"
    POWER = "power"


def eps_upper_bound(model: Model) -> float:
    return 0.5 if model is Model.CH_AC_HOMOTOPY else 1.0


def check_eps(model: Model, eps: float) -> None:
    """ε in (0, 1), or (0, 1/2] for the homotopy model."""
    upper = eps_upper_bound(model)
    if model is Model.CH_AC_HOMOTOPY:
        valid = 0.0 < eps <= upper
    else:
        valid = 0.0 < eps < upper
    if not valid:
        raise ConfigurationError(
            f"eps={eps} outside the admissible range for model {model.value}"
        )


@dataclass(frozen=True)
class SigmaSchedule:
    """
    Noise strength as a function of ε.

    ``log_inverse`` is σ₀/log(1/ε); ``log_inverse_sqrt`` is σ₀/√log(1/ε), the
    scaling under which σ_ε²·Σ1/λ_k(ε) has a nonzero limit.
    """

    kind: SigmaKind
    amplitude: float
    exponent: float = 0.0

    def __post_init__(self) -> None:
        if self.amplitude < 0 or not math.isfinite(self.amplitude):
            raise ConfigurationError(
                f"sigma amplitude must be finite and >= 0, got {self.amplitude}"
            )
        if self.kind is not SigmaKind.POWER and self.exponent != 0.0:
            raise ConfigurationError("exponent only applies to power schedules")

    @classmethod
    def constant(cls, amplitude: float) -> SigmaSchedule:
        return cls(SigmaKind.CONSTANT, amplitude)

    def __call__(self, eps: float) -> float:
        if not (0.0 < eps < 1.0):
            raise ConfigurationError(
                f"sigma schedules need eps in (0, 1), got {eps}"
            )
        if self.kind is SigmaKind.CONSTANT:
            return self.amplitude
        if self.kind is SigmaKind.LOG_INVERSE:
            return self.amplitude / math.log(1.0 / eps)
        if self.kind is SigmaKind.LOG_INVERSE_SQRT:
            return self.amplitude / math.sqrt(math.log(1.0 / eps))
        return self.amplitude * eps**self.exponent

    @property
    def regime(self) -> str:
        """
        Fate of σ_ε²·log(1/ε), which governs the renormalization constant.

        Returns:
            "zero", "finite" or "divergent"
        """
        if self.amplitude == 0.0:
            return "zero"
        if self.kind in (SigmaKind.LOG_INVERSE, SigmaKind.LOG_INVERSE_SQRT):
            return "finite"
        if self.kind is SigmaKind.POWER and self.exponent > 0:
            return "zero"
        return "divergent"

    def to_dict(self) -> dict[str, object]:
        return {
            "kind": self.kind.value,
            "amplitude": self.amplitude,
            "exponent": self.exponent,
        }


@dataclass(frozen=True)
class ModelSpec:
    """One ε-model with its noise strength and renormalization constant."""

    model: Model
    eps: float
    sigma: float
    mollifier: Mollifier = Mollifier.NONE
    c_zero: Optional[float] = None
    include_zero_mode: bool = True

    def __post_init__(self) -> None:
        check_eps(self.model, self.eps)
        if self.sigma < 0 or not math.isfinite(self.sigma):
            raise ConfigurationError(
                f"sigma must be finite and >= 0, got {self.sigma}"
            )
        if self.c_zero is not None and self.c_zero < 0:
            raise ConfigurationError(f"c_zero must be >= 0, got {self.c_zero}")
        if self.model is Model.AC_MOLLIFIED_NOISE:
            if self.mollifier is Mollifier.NONE:
                object.__setattr__(self, "mollifier", Mollifier.EXPONENTIAL)
        elif self.mollifier is not Mollifier.NONE:
            raise ConfigurationError(
                f"mollifier {self.mollifier.value} only applies to "
                f"{Model.AC_MOLLIFIED_NOISE.value}"
            )

    @classmethod
    def from_schedule(
        cls,
        model: Model,
        eps: float,
        schedule: SigmaSchedule,
        **kwargs: object,
    ) -> ModelSpec:
        return cls(model, eps, schedule(eps), **kwargs)  # type: ignore[arg-type]

    @property
    def c_eps_threshold(self) -> float:
        """c_ε of the cubic structure condition: ε^{1/4} or 0."""
        return self.eps**0.25 if self.model is Model.CH_AC_HOMOTOPY else 0.0

    def require_c_zero(self) -> float:
        if self.c_zero is None:
            raise ConfigurationError("renormalization constant c_zero is not set")
        return self.c_zero

    def with_c_zero(self, c_zero: float) -> ModelSpec:
        return replace(self, c_zero=c_zero)

    def label(self) -> str:
        return f"{self.model.value}(eps={self.eps:g}, sigma={self.sigma:g})"


def lambda_k(model: Model, eps: float, mu: ArrayLike) -> Scalar:
    """Eigenvalue λ_k(ε) of -A_ε for a mode with -Δ eigenvalue μ."""
    check_eps(model, eps)
    mu = np.asarray(mu, dtype=np.float64)
    if model is Model.CH_AC_HOMOTOPY:
        lam = (1.0 - eps + eps * mu) * mu
    elif model is Model.AC_BILAPLACIAN:
        lam = mu + eps**2 * mu**2
    else:
        lam = mu.copy()
    return lam if lam.ndim else float(lam)


def mollifier_symbol(mollifier: Mollifier, eps: float, mu: ArrayLike) -> Scalar:
    mu = np.asarray(mu, dtype=np.float64)
    if mollifier is Mollifier.EXPONENTIAL:
        q = np.exp(-(eps**2) * mu / 2.0)
    elif mollifier is Mollifier.SHARP_CUTOFF:
        q = (mu <= eps**-2).astype(np.float64)
    else:
        q = np.ones_like(mu)
    return q if q.ndim else float(q)


def noise_amp(
    model: Model,
    eps: float,
    sigma: float,
    mu: ArrayLike,
    mollifier: Mollifier = Mollifier.EXPONENTIAL,
) -> Scalar:
    """Per-mode noise amplitude α_k(ε)."""
    mu = np.asarray(mu, dtype=np.float64)
    if model is Model.AC_MOLLIFIED_NOISE:
        amp = sigma * np.asarray(mollifier_symbol(mollifier, eps, mu))
    else:
        amp = np.full_like(mu, sigma)
    return amp if amp.ndim else float(amp)


def v_eps_weight(model: Model, eps: float, mu: ArrayLike) -> Scalar:
    """V_ε norm weight 1 + λ_k(ε); the V_ε′ weight is its reciprocal."""
    return 1.0 + lambda_k(model, eps, mu)


def nonlinearity_multiplier(model: Model, eps: float, mu: ArrayLike) -> Scalar:
    mu = np.asarray(mu, dtype=np.float64)
    if model is Model.CH_AC_HOMOTOPY:
        m = 1.0 - eps + eps * mu
    else:
        m = np.ones_like(mu)
    return m if m.ndim else float(m)


def cubic(x: ArrayLike) -> Scalar:
    x = np.asarray(x, dtype=np.float64)
    out = x - x**3
    return out if out.ndim else float(out)


def cubic_gap(phi: ArrayLike, psi: ArrayLike) -> Scalar:
    """
    φ² - ¼φ⁴ - (f(φ+ψ) - f(ψ))·φ, nonnegative for all real φ, ψ.

    Expanded, the gap equals φ²(3ψ² + 3φψ + ¾φ²) = ¾φ²(φ + 2ψ)², which is
    evaluated directly so the sign is exact in floating point.
    """
    phi = np.asarray(phi, dtype=np.float64)
    psi = np.asarray(psi, dtype=np.float64)
    gap = 0.75 * phi**2 * (phi + 2.0 * psi) ** 2
    return gap if gap.ndim else float(gap)


def cubic_gap_direct(phi: ArrayLike, psi: ArrayLike) -> Scalar:
    """Unsimplified form of :func:`cubic_gap`, kept for cross-checks."""
    phi = np.asarray(phi, dtype=np.float64)
    psi = np.asarray(psi, dtype=np.float64)
    gap = phi**2 - 0.25 * phi**4 - (
        np.asarray(cubic(phi + psi)) - np.asarray(cubic(psi))
    ) * phi
    return gap if gap.ndim else float(gap)


@dataclass(frozen=True, eq=False)
class SpectralSymbols:
    """Tabulated per-mode symbols of one ModelSpec on one grid."""

    lam: FloatArray
    alpha: FloatArray
    weight: FloatArray
    dual_weight: FloatArray
    nonlinear: FloatArray


@lru_cache(maxsize=64)
def spectral_symbols(spec: ModelSpec, grid: FourierGrid) -> SpectralSymbols:
    """
    Tabulate λ, α, V_ε weights and the nonlinearity multiplier on a grid.

    The noise amplitude is restricted to the dealias-retained modes so that
    Z_ε lives on the same Galerkin space as v_ε. The k=0 amplitude is σ, or
    zero when ``include_zero_mode`` is off.
    """
    mu = grid.mu
    lam = np.asarray(lambda_k(spec.model, spec.eps, mu))
    alpha = np.asarray(
        noise_amp(spec.model, spec.eps, spec.sigma, mu, spec.mollifier)
    ) * grid.dealias_mask
    if not spec.include_zero_mode:
        alpha[0, 0] = 0.0
    weight = 1.0 + lam
    tables = SpectralSymbols(
        lam=lam,
        alpha=alpha,
        weight=weight,
        dual_weight=1.0 / weight,
        nonlinear=np.asarray(nonlinearity_multiplier(spec.model, spec.eps, mu)),
    )
    for array in (lam, alpha, weight, tables.dual_weight, tables.nonlinear):
        array.setflags(write=False)
    logger.debug(f"Tabulated symbols for {spec.label()} on n={grid.n}")
    return tables


def cubic_field(u: SpectralField) -> SpectralField:
    """f(u) = u - u³ restricted to the dealias-retained modes."""
    return u.masked() - dealiased_cube(u)


def nonlinearity(
    spec: ModelSpec, u: SpectralField, c_zero_term: bool = False
) -> SpectralField:
    """
    Nonlinear drift F_ε(u) of the ε-model.

    Args:
        spec: Model, ε and (when ``c_zero_term``) C₀
        u: Hermitian-symmetric field
        c_zero_term: Subtract 3·C₀·u, turning f into the limit drift G

    Returns:
        F_ε(u), or f(u) - 3C₀u
    """
    if c_zero_term and spec.model is Model.CH_AC_HOMOTOPY:
        raise ConfigurationError(
            "the C0 term belongs to the limit equation, not to the "
            "(1-eps-eps*Laplacian) multiplied homotopy nonlinearity"
        )
    f_u = cubic_field(u)
    if spec.model is Model.CH_AC_HOMOTOPY:
        symbols = spectral_symbols(spec, u.grid)
        return SpectralField(u.grid, f_u.coeffs * symbols.nonlinear)
    if c_zero_term:
        return f_u - u.masked().scale(3.0 * spec.require_c_zero())
    return f_u


def limit_drift(u: SpectralField, c_zero: float) -> SpectralField:
    """G(u) = u - u³ - 3·C₀·u."""
    return cubic_field(u) - u.masked().scale(3.0 * c_zero)
