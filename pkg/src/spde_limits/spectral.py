"""
Spectral core: real scalar fields on the flat torus [0, 2π)².

Fields are stored as full complex spectra in the standard FFT layout. The
transform pair is normalized so that coefficient (0, 0) is the spatial mean
and Parseval reads ``sum |c_k|² = mean(f²)``; every norm in the package is
therefore a weighted coefficient sum.

Products are dealiased with the 1/2 rule: inputs are truncated to
``max(|k1|, |k2|) <= n/4`` and multiplied on a zero-padded ``3n/2`` grid, which
keeps quadratic and cubic products exact on every retained mode.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
from numpy.typing import NDArray

from .errors import ConfigurationError, GridMismatchError

FloatArray = NDArray[np.float64]
ComplexArray = NDArray[np.complex128]

MIN_MODES = 8

logger = logging.getLogger(__name__)


def _frozen(array: NDArray) -> NDArray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class FourierGrid:
    """
    n×n physical grid and the matching integer wavenumber lattice.

    Immutable; all derived tables are read-only arrays computed on first use.
    Axis 0 carries k1 / x1, axis 1 carries k2 / x2.
    """

    n: int

    def __post_init__(self) -> None:
        if not isinstance(self.n, (int, np.integer)) or isinstance(self.n, bool):
            raise ConfigurationError(f"grid size must be an integer, got {self.n!r}")
        if self.n % 2 or self.n < MIN_MODES:
            raise ConfigurationError(
                f"grid size must be even and >= {MIN_MODES}, got {self.n}"
            )

    @cached_property
    def wavenumbers(self) -> tuple[NDArray[np.int64], NDArray[np.int64]]:
        """(k1, k2) tables, each n×n, components in {-n/2, ..., n/2-1}."""
        k = np.fft.fftfreq(self.n, d=1.0 / self.n).round().astype(np.int64)
        k1, k2 = np.meshgrid(k, k, indexing="ij")
        return _frozen(k1), _frozen(k2)

    @cached_property
    def mu(self) -> FloatArray:
        """Eigenvalue of -Δ per mode, μ_k = k1² + k2²."""
        k1, k2 = self.wavenumbers
        return _frozen((k1**2 + k2**2).astype(np.float64))

    @property
    def dealias_cutoff(self) -> int:
        return self.n // 4

    @cached_property
    def dealias_mask(self) -> NDArray[np.bool_]:
        k1, k2 = self.wavenumbers
        return _frozen(np.maximum(np.abs(k1), np.abs(k2)) <= self.dealias_cutoff)

    @cached_property
    def nonzero_mask(self) -> NDArray[np.bool_]:
        """Dealias-retained modes other than k = 0."""
        mask = self.dealias_mask.copy()
        mask[0, 0] = False
        return _frozen(mask)

    @cached_property
    def reflect_index(self) -> NDArray[np.int64]:
        """Index of -k along one axis, with -(-n/2) wrapping onto itself."""
        return _frozen((-np.arange(self.n)) % self.n)

    @property
    def padded_n(self) -> int:
        return self.n + self.n // 2

    @cached_property
    def padded_index(self) -> tuple[NDArray[np.int64], NDArray[np.int64]]:
        """Positions of the retained modes inside the padded spectrum."""
        k1, k2 = self.wavenumbers
        m = self.padded_n
        mask = self.dealias_mask
        return _frozen(k1[mask] % m), _frozen(k2[mask] % m)

    @cached_property
    def points(self) -> tuple[FloatArray, FloatArray]:
        """Physical coordinates x_ij = (2πi/n, 2πj/n)."""
        x = 2.0 * np.pi * np.arange(self.n) / self.n
        x1, x2 = np.meshgrid(x, x, indexing="ij")
        return _frozen(x1), _frozen(x2)

    def reflect(self, array: NDArray) -> NDArray:
        """Return array evaluated at -k over the last two axes."""
        idx = self.reflect_index
        return array[..., idx, :][..., :, idx]

    def index_of(self, k1: int, k2: int) -> tuple[int, int]:
        half = self.n // 2
        if not (-half <= k1 < half and -half <= k2 < half):
            raise ConfigurationError(f"mode ({k1}, {k2}) is not on an n={self.n} grid")
        return k1 % self.n, k2 % self.n


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Complex Fourier coefficients of a real field (Hermitian symmetric)."""

    grid: FourierGrid
    coeffs: ComplexArray

    def __post_init__(self) -> None:
        n = self.grid.n
        if self.coeffs.shape != (n, n):
            raise GridMismatchError(
                f"coefficient array {self.coeffs.shape} does not match n={n}"
            )

    @classmethod
    def zeros(cls, grid: FourierGrid) -> SpectralField:
        return cls(grid, np.zeros((grid.n, grid.n), dtype=np.complex128))

    @classmethod
    def constant(cls, grid: FourierGrid, value: float) -> SpectralField:
        """The flat field, with every k ≠ 0 coefficient exactly zero."""
        field = cls.zeros(grid)
        field.coeffs[0, 0] = float(value)
        return field

    def mode(self, k1: int, k2: int) -> complex:
        return complex(self.coeffs[self.grid.index_of(k1, k2)])

    def is_hermitian(self) -> bool:
        """Exact (bit-level) check of coeff(-k) == conj(coeff(k))."""
        mirrored = self.grid.reflect(self.coeffs)
        return bool(np.array_equal(mirrored, np.conj(self.coeffs)))

    def _check(self, other: SpectralField) -> None:
        if other.grid != self.grid:
            raise GridMismatchError(
                f"fields live on n={self.grid.n} and n={other.grid.n} grids"
            )

    def __add__(self, other: SpectralField) -> SpectralField:
        self._check(other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: SpectralField) -> SpectralField:
        self._check(other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __neg__(self) -> SpectralField:
        return SpectralField(self.grid, -self.coeffs)

    def scale(self, factor: float) -> SpectralField:
        return SpectralField(self.grid, self.coeffs * float(factor))

    def masked(self) -> SpectralField:
        coeffs = np.where(self.grid.dealias_mask, self.coeffs, 0)
        return SpectralField(self.grid, coeffs)


@dataclass(frozen=True, eq=False)
class RealField:
    """Physical samples of a real field on the n×n grid."""

    grid: FourierGrid
    values: FloatArray

    def __post_init__(self) -> None:
        n = self.grid.n
        if self.values.shape != (n, n):
            raise GridMismatchError(
                f"value array {self.values.shape} does not match n={n}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ConfigurationError("physical field contains non-finite values")


def make_grid(n: int) -> FourierGrid:
    """Build the n×n Fourier grid; n must be even and at least 8."""
    return FourierGrid(n)


def symmetrize(coeffs: ComplexArray, grid: FourierGrid) -> ComplexArray:
    """Project onto Hermitian-symmetric spectra; exact to the bit afterwards."""
    return (coeffs + np.conj(grid.reflect(coeffs))) / 2


def forward(field: RealField) -> SpectralField:
    grid = field.grid
    coeffs = np.fft.fft2(field.values) / grid.n**2
    return SpectralField(grid, symmetrize(coeffs, grid))


def inverse(field: SpectralField) -> RealField:
    grid = field.grid
    values = np.fft.ifft2(field.coeffs).real * grid.n**2
    return RealField(grid, values)


def to_physical(coeffs: ComplexArray, grid: FourierGrid) -> FloatArray:
    """Batched inverse transform over the last two axes."""
    return np.fft.ifft2(coeffs).real * grid.n**2


def from_function(
    grid: FourierGrid, func: Callable[[FloatArray, FloatArray], FloatArray]
) -> SpectralField:
    """Sample func(x1, x2) on the grid and transform it."""
    x1, x2 = grid.points
    values = np.broadcast_to(np.asarray(func(x1, x2), dtype=np.float64), x1.shape)
    return forward(RealField(grid, np.array(values)))


def check_multiplier(grid: FourierGrid, multiplier: FloatArray) -> FloatArray:
    m = np.asarray(multiplier, dtype=np.float64)
    if m.shape != (grid.n, grid.n):
        raise GridMismatchError(f"multiplier shape {m.shape} does not match n={grid.n}")
    if not np.array_equal(grid.reflect(m), m):
        raise ConfigurationError("multiplier symbol must satisfy m(-k) == m(k)")
    return m


def apply_multiplier(field: SpectralField, multiplier: FloatArray) -> SpectralField:
    """Diagonal operator: coeff_out(k) = m(k)·coeff_in(k)."""
    m = check_multiplier(field.grid, multiplier)
    return SpectralField(field.grid, field.coeffs * m)


def to_padded_physical(coeffs: ComplexArray, grid: FourierGrid) -> FloatArray:
    """
    Physical values of the dealias-truncated field on the padded grid.

    Accepts a stack of spectra (..., n, n) and returns (..., m, m) with
    m = 3n/2.
    """
    m = grid.padded_n
    padded = np.zeros(coeffs.shape[:-2] + (m, m), dtype=np.complex128)
    i, j = grid.padded_index
    padded[..., i, j] = coeffs[..., grid.dealias_mask]
    return np.fft.ifft2(padded).real * m**2


def from_padded_physical(values: FloatArray, grid: FourierGrid) -> ComplexArray:
    """Transform padded physical values back and keep the retained modes."""
    m = grid.padded_n
    spectrum = np.fft.fft2(values) / m**2
    out = np.zeros(values.shape[:-2] + (grid.n, grid.n), dtype=np.complex128)
    i, j = grid.padded_index
    out[..., grid.dealias_mask] = spectrum[..., i, j]
    return symmetrize(out, grid)


def dealiased_product(*fields: SpectralField) -> SpectralField:
    """Pointwise product of up to three fields, exact on the retained modes."""
    if not 1 <= len(fields) <= 3:
        raise ConfigurationError("dealiased products take one to three factors")
    grid = fields[0].grid
    product = to_padded_physical(fields[0].coeffs, grid)
    for other in fields[1:]:
        fields[0]._check(other)
        product = product * to_padded_physical(other.coeffs, grid)
    return SpectralField(grid, from_padded_physical(product, grid))


def dealiased_square(u: SpectralField) -> SpectralField:
    return dealiased_product(u, u)


def dealiased_cube(u: SpectralField) -> SpectralField:
    """Spectral coefficients of u³ on the dealias-retained modes."""
    physical = to_padded_physical(u.coeffs, u.grid)
    return SpectralField(u.grid, from_padded_physical(physical**3, u.grid))


def weighted_norm_sq(coeffs: ComplexArray, weight: FloatArray | float) -> FloatArray:
    """Σ_k weight_k·|c_k|² over the last two axes, batched over the rest."""
    return np.sum(weight * (coeffs.real**2 + coeffs.imag**2), axis=(-2, -1))


def sobolev_weight(grid: FourierGrid, s: float) -> FloatArray:
    return (1.0 + grid.mu) ** s
