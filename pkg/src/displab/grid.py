"""Spectral grid, field storage, and Fourier-multiplier calculus on a torus.

Everything downstream works on the truncated domain [-half_length, half_length)
with periodic boundary conditions. The Fourier conventions are chosen to match
the whole-line transform, so that norms and constants computed here can be
compared directly against closed-form integrals:

    coeff(xi_k) = integral f(x) exp(-i xi_k x) dx   (approximated by dx * DFT)
    f(x_m)      = (1 / 2 half_length) * sum_k coeff(xi_k) exp(i xi_k x_m)

with wavenumbers xi_k = pi * k / half_length, k = -n_modes/2 .. n_modes/2 - 1.
Under this pairing Plancherel reads

    dx * sum_m |f(x_m)|^2 = (1 / 2 half_length) * sum_k |coeff_k|^2,

and both sides define ``l2_norm`` squared. Coefficients are stored in FFT
order and are always complex; real-valued data is a property of the field, not
of the storage.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "TorusGrid",
    "SpectralField",
    "MultiplierSymbol",
    "to_physical",
    "to_spectral",
    "apply_multiplier",
    "derivative",
    "fractional_derivative",
    "pointwise_product",
    "multiply_by_x",
    "boundary_mass_fraction",
    "real_projection",
    "l2_norm",
    "hilbert_symbol",
    "depth_averaged_symbol",
    "coth",
]


class TorusGrid:
    """Uniform grid on [-half_length, half_length) with a power-of-two mode count.

    Attributes:
        half_length: half the period (the domain is 2 * half_length wide).
        n_modes: number of grid points / retained Fourier modes.
        dx: grid spacing, 2 * half_length / n_modes.
        x: physical nodes -half_length + m * dx, m = 0 .. n_modes - 1.
        mode_index: integer mode numbers in FFT order.
        wavenumbers: xi_k = pi * mode_index / half_length, FFT order.
    """

    def __init__(self, half_length: float, n_modes: int) -> None:
        if not half_length > 0:
            raise ValueError(f"half_length must be positive, got {half_length}")
        if n_modes < 8 or (n_modes & (n_modes - 1)) != 0:
            raise ValueError(
                f"n_modes must be a power of two and at least 8, got {n_modes}"
            )
        self.half_length = float(half_length)
        self.n_modes = int(n_modes)
        self.dx = 2.0 * self.half_length / self.n_modes
        self.x = -self.half_length + self.dx * np.arange(self.n_modes)
        self.mode_index = np.fft.fftfreq(self.n_modes, d=1.0 / self.n_modes).astype(int)
        self.wavenumbers = (np.pi / self.half_length) * self.mode_index
        # exp(+-i xi_k * half_length) = (-1)^k, the twist that recenters the
        # plain DFT (which assumes x starting at 0) onto [-L, L).
        self._center_phase = np.where(self.mode_index % 2 == 0, 1.0, -1.0)
        self._dealias_keep = np.abs(self.mode_index) <= self.n_modes / 3.0

    @property
    def max_wavenumber(self) -> float:
        return np.pi * (self.n_modes // 2) / self.half_length

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TorusGrid):
            return NotImplemented
        return self.half_length == other.half_length and self.n_modes == other.n_modes

    def __hash__(self) -> int:
        return hash((self.half_length, self.n_modes))

    def __repr__(self) -> str:
        return f"TorusGrid(half_length={self.half_length!r}, n_modes={self.n_modes})"

    def field_from_samples(self, samples: np.ndarray) -> "SpectralField":
        """Transform physical samples (given on ``self.x``) into a field."""
        samples = np.asarray(samples, dtype=complex)
        if samples.shape != (self.n_modes,):
            raise ValueError(
                f"expected {self.n_modes} samples, got shape {samples.shape}"
            )
        coeffs = self.dx * self._center_phase * np.fft.fft(samples)
        return SpectralField(self, coeffs)

    def field_from_function(self, fn: Callable[[np.ndarray], np.ndarray]) -> "SpectralField":
        return self.field_from_samples(np.asarray(fn(self.x), dtype=complex))

    def field_from_coeffs(self, coeffs: np.ndarray) -> "SpectralField":
        coeffs = np.asarray(coeffs, dtype=complex)
        if coeffs.shape != (self.n_modes,):
            raise ValueError(
                f"expected {self.n_modes} coefficients, got shape {coeffs.shape}"
            )
        return SpectralField(self, coeffs.copy())

    def zero_field(self) -> "SpectralField":
        return SpectralField(self, np.zeros(self.n_modes, dtype=complex))


@dataclass
class SpectralField:
    """A function on the torus, stored by its Fourier coefficients (FFT order)."""

    grid: TorusGrid
    coeffs: np.ndarray

    def physical(self) -> np.ndarray:
        """Complex samples on ``grid.x``."""
        twisted = self.grid._center_phase * self.coeffs
        return np.fft.ifft(twisted) / self.grid.dx

    def with_coeffs(self, coeffs: np.ndarray) -> "SpectralField":
        return SpectralField(self.grid, np.asarray(coeffs, dtype=complex))

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs.copy())

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _check_same_grid(self.grid, other.grid)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _check_same_grid(self.grid, other.grid)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar: complex) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, -self.coeffs)


@dataclass(frozen=True)
class MultiplierSymbol:
    """A Fourier multiplier xi -> m(xi) with an explicit value at xi = 0.

    Symbols like sgn(xi) or coth(h xi) are singular or ambiguous at the mean
    mode, so the value there is part of the definition rather than left to
    floating-point accident. ``evaluate`` substitutes ``value_at_zero`` at
    xi = 0 before checking finiteness.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    value_at_zero: complex = 0.0
    name: str = "multiplier"

    def evaluate(self, wavenumbers: np.ndarray) -> np.ndarray:
        with np.errstate(all="ignore"):
            values = np.asarray(self.fn(wavenumbers), dtype=complex)
        values = np.broadcast_to(values, wavenumbers.shape).copy()
        values[wavenumbers == 0.0] = self.value_at_zero
        bad = ~np.isfinite(values)
        if np.any(bad):
            xi_bad = np.asarray(wavenumbers)[bad][0]
            raise ValueError(
                f"{self.name} symbol is not finite at wavenumber xi={xi_bad:g}"
            )
        return values


def _check_same_grid(a: TorusGrid, b: TorusGrid) -> None:
    if a != b:
        raise ValueError(f"grids do not match: {a} vs {b}")


def to_physical(field: SpectralField) -> np.ndarray:
    return field.physical()


def to_spectral(grid: TorusGrid, samples: np.ndarray) -> SpectralField:
    return grid.field_from_samples(samples)


def l2_norm(field: SpectralField) -> float:
    """The L^2 norm, evaluated on the spectral side via Plancherel."""
    return float(
        np.sqrt(np.sum(np.abs(field.coeffs) ** 2) / (2.0 * field.grid.half_length))
    )


def apply_multiplier(field: SpectralField, symbol: MultiplierSymbol) -> SpectralField:
    values = symbol.evaluate(field.grid.wavenumbers)
    return field.with_coeffs(values * field.coeffs)


def derivative(field: SpectralField, order: int = 1) -> SpectralField:
    if order < 0:
        raise ValueError(f"derivative order must be nonnegative, got {order}")
    xi = field.grid.wavenumbers
    return field.with_coeffs((1j * xi) ** order * field.coeffs)


def fractional_derivative(field: SpectralField, exponent: float) -> SpectralField:
    """Apply |xi|^exponent. The mean mode maps to 0 for positive exponents."""
    symbol = MultiplierSymbol(
        lambda xi: np.abs(xi) ** exponent,
        value_at_zero=0.0 if exponent > 0 else 1.0,
        name=f"|xi|^{exponent:g}",
    )
    return apply_multiplier(field, symbol)


def pointwise_product(f: SpectralField, g: SpectralField) -> SpectralField:
    """Dealiased product: modes above two thirds of the cutoff are dropped
    on input and output, which makes the quadratic product alias-free."""
    _check_same_grid(f.grid, g.grid)
    keep = f.grid._dealias_keep
    ff = f.with_coeffs(np.where(keep, f.coeffs, 0.0))
    gg = g.with_coeffs(np.where(keep, g.coeffs, 0.0))
    product = f.grid.field_from_samples(ff.physical() * gg.physical())
    product.coeffs[~keep] = 0.0
    return product


def multiply_by_x(field: SpectralField) -> SpectralField:
    """Multiply by the centered coordinate x_m on the physical side."""
    return field.grid.field_from_samples(field.grid.x * field.physical())


def boundary_mass_fraction(field: SpectralField) -> float:
    """Share of the squared mass sitting at |x| > 0.9 * half_length.

    Weighted-norm results are only meaningful when this is below 1e-6, i.e.
    when the torus truncation is not visibly interacting with the data.
    """
    density = np.abs(field.physical()) ** 2
    total = float(np.sum(density))
    if total == 0.0:
        return 0.0
    near_edge = np.abs(field.grid.x) > 0.9 * field.grid.half_length
    return float(np.sum(density[near_edge]) / total)


def real_projection(field: SpectralField) -> SpectralField:
    """Drop the imaginary part of the physical samples."""
    return field.grid.field_from_samples(field.physical().real)


def coth(y: np.ndarray) -> np.ndarray:
    """Stable hyperbolic cotangent: 1 + 2 / expm1(2y), odd in y."""
    with np.errstate(over="ignore", divide="ignore"):
        return 1.0 + 2.0 / np.expm1(2.0 * np.asarray(y, dtype=float))


def hilbert_symbol() -> MultiplierSymbol:
    """The Hilbert transform multiplier -i sgn(xi), with sgn(0) = 0."""
    return MultiplierSymbol(
        lambda xi: -1j * np.sign(xi), value_at_zero=0.0, name="hilbert"
    )


def depth_averaged_symbol(depth: float) -> MultiplierSymbol:
    """The finite-depth multiplier -i coth(depth * xi), set to 0 at xi = 0.

    Recovers the Hilbert multiplier as depth -> infinity and blows up like
    -i / (depth * xi) as xi -> 0, which is why the mean-mode value is pinned.
    """
    if not depth > 0:
        raise ValueError(f"depth must be positive, got {depth}")
    return MultiplierSymbol(
        lambda xi: -1j * coth(depth * xi),
        value_at_zero=0.0,
        name=f"depth_averaged(h={depth:g})",
    )
