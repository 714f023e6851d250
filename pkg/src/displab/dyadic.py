"""Smooth dyadic frequency decomposition with an explicit cutoff.

The low-pass profile is built from the classical C~infinity bump
g(t) = exp(-1/t) (t > 0, else 0):

    chi(xi) = 1                                   for |xi| <= 1,
    chi(xi) = g(2 - a) / (g(2 - a) + g(a - 1))    for 1 < a = |xi| < 2,
    chi(xi) = 0                                   for |xi| >= 2.

The annulus profile is psi(xi) = chi(xi) - chi(2 xi), and block l uses
psi(2^{-l} xi), supported in 2^{l-1} <= |xi| <= 2^{l+1}. The choice of chi
makes psi(1) = 1, so a pure mode at xi = 2^l sits in exactly one block.
The telescoping identity chi(xi) + sum_{l>=1} psi(2^{-l} xi) = chi(2^{-L} xi)
is what reconstruction and all block-sum norms rely on; the low-pass part plus
blocks 1..l_max therefore reproduces any field supported in |xi| <= 2^{l_max}.

Commutator blocks implement the exact identity

    x * (block_l f) = block_l(x f) + commutator_block_l f

whose multiplier is i * 2^{-l} * psi'(2^{-l} xi): multiplication by x acts as
i d/dxi on the frequency side, and the derivative landing on the cutoff is the
commutator. (The i matters: without it the identity fails identically.)
"""

from __future__ import annotations

import numpy as np

from displab.grid import SpectralField, TorusGrid

__all__ = [
    "bump",
    "bump_derivative",
    "cutoff",
    "cutoff_derivative",
    "annulus",
    "annulus_derivative",
    "fattened_annulus",
    "DyadicDecomposition",
]


def bump(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        values = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
    return values


def bump_derivative(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        safe = np.where(t > 0, t, 1.0)
        return np.where(t > 0, np.exp(-1.0 / safe) / safe**2, 0.0)


def cutoff(xi: np.ndarray) -> np.ndarray:
    a = np.abs(np.asarray(xi, dtype=float))
    lo = bump(2.0 - a)
    hi = bump(a - 1.0)
    with np.errstate(invalid="ignore"):
        ramp = lo / np.where(lo + hi > 0, lo + hi, 1.0)
    return np.where(a <= 1.0, 1.0, np.where(a >= 2.0, 0.0, ramp))


def cutoff_derivative(xi: np.ndarray) -> np.ndarray:
    """d(chi)/d(xi); supported on 1 < |xi| < 2, odd symmetry via sgn(xi)."""
    xi = np.asarray(xi, dtype=float)
    a = np.abs(xi)
    lo, hi = bump(2.0 - a), bump(a - 1.0)
    dlo, dhi = bump_derivative(2.0 - a), bump_derivative(a - 1.0)
    denom = np.where(lo + hi > 0, (lo + hi) ** 2, 1.0)
    inside = (a > 1.0) & (a < 2.0)
    d_da = np.where(inside, (-dlo * hi - lo * dhi) / denom, 0.0)
    return np.sign(xi) * d_da


def annulus(xi: np.ndarray) -> np.ndarray:
    return cutoff(xi) - cutoff(2.0 * np.asarray(xi, dtype=float))


def annulus_derivative(xi: np.ndarray) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    return cutoff_derivative(xi) - 2.0 * cutoff_derivative(2.0 * xi)


def fattened_annulus(xi: np.ndarray) -> np.ndarray:
    """chi(xi/2) - chi(4 xi): equals 1 on the support of ``annulus``."""
    xi = np.asarray(xi, dtype=float)
    return cutoff(xi / 2.0) - cutoff(4.0 * xi)


class DyadicDecomposition:
    """Grid-resolved block operators S0 and Delta_l, l = 0 .. l_max.

    l_max is the largest index with 2^{l_max + 1} <= max grid wavenumber;
    higher blocks vanish identically on the grid. Symbol tables for the
    low pass, every block, the fattened blocks, and the commutator blocks
    are precomputed once per grid.
    """

    def __init__(self, grid: TorusGrid) -> None:
        self.grid = grid
        l_max = 0
        while 2.0 ** (l_max + 2) <= grid.max_wavenumber * (1 + 1e-12):
            l_max += 1
        if l_max < 1:
            raise ValueError(
                f"grid resolves no dyadic blocks: max wavenumber "
                f"{grid.max_wavenumber:g} < 4"
            )
        self.l_max = l_max
        xi = grid.wavenumbers
        self.low_values = cutoff(xi)
        self.block_values = np.stack(
            [annulus(xi / 2.0**l) for l in range(l_max + 1)]
        )
        self.fattened_values = np.stack(
            [fattened_annulus(xi / 2.0**l) for l in range(l_max + 1)]
        )
        self.commutator_values = np.stack(
            [1j * 2.0**-l * annulus_derivative(xi / 2.0**l) for l in range(l_max + 1)]
        )
        self.low_commutator_values = 1j * cutoff_derivative(xi)

    def _check_index(self, l: int) -> None:
        if not 0 <= l <= self.l_max:
            raise ValueError(f"block index {l} out of range [0, {self.l_max}]")

    def low_pass(self, field: SpectralField) -> SpectralField:
        return field.with_coeffs(self.low_values * field.coeffs)

    def block(self, field: SpectralField, l: int) -> SpectralField:
        self._check_index(l)
        return field.with_coeffs(self.block_values[l] * field.coeffs)

    def fattened_block(self, field: SpectralField, l: int) -> SpectralField:
        self._check_index(l)
        return field.with_coeffs(self.fattened_values[l] * field.coeffs)

    def commutator_block(self, field: SpectralField, l: int) -> SpectralField:
        self._check_index(l)
        return field.with_coeffs(self.commutator_values[l] * field.coeffs)

    def commutator_low(self, field: SpectralField) -> SpectralField:
        return field.with_coeffs(self.low_commutator_values * field.coeffs)

    def reconstruct(self, field: SpectralField) -> SpectralField:
        """S0 f + sum_{l=1..l_max} Delta_l f."""
        total = self.low_values + self.block_values[1:].sum(axis=0)
        return field.with_coeffs(total * field.coeffs)
