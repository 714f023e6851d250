"""Equation families, their linear groups, nonlinearities, and Duhamel sums.

Three families are supported, all first order in time with odd-order
dispersion:

* ``GenericEquation``: u_t = (linear part with phase (-1)^{j+1} xi^{2j+1})
  plus a quadratic nonlinearity sum_{(j1,j2)} a_{j1,j2} (d^{j1}u)(d^{j2}u)
  over ordered index pairs with 0 <= j1 + j2 <= 2j. The Fourier solution of
  the linear part is u-hat(t) = exp(i (-1)^{j+1} xi^{2j+1} t) u-hat(0).
* ``BenjaminOnoEquation``: third-order correction of the Benjamin-Ono
  equation. Linear phase p(xi) = b |xi| xi + a eps xi^3; nonlinearity
  c u u_x - d eps d_x(u H u_x + H(u u_x)) with H the Hilbert transform.
* ``IntermediateLongWaveEquation``: finite-depth analogue. Linear phase
  p(xi) = b coth(depth xi) xi^2 + (a1 coth^2(depth xi) + a2) eps xi^3
  (continuously extended by 0 at xi = 0); nonlinearity as above with the
  depth-averaged operator in place of H.

The integral (Duhamel) form drives everything downstream:

    u(t) = group(t) u0 + integral_0^t group(t - t') N(u(t')) dt'.

``duhamel_trajectory`` evaluates the integral with the trapezoid rule on the
trajectory's stored nodes, factoring the group exactly per mode: with
w(t') = exp(-i omega t') f-hat(t'), the integral is exp(i omega t) times the
running trapezoid sum of w. Time grids may extend to negative times; the sum
is anchored at the t = 0 node.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field
from typing import Dict, Tuple, Union

import numpy as np

from displab.grid import (
    MultiplierSymbol,
    SpectralField,
    apply_multiplier,
    coth,
    depth_averaged_symbol,
    derivative,
    hilbert_symbol,
    pointwise_product,
)
from displab.trajectory import Trajectory

__all__ = [
    "GenericEquation",
    "BenjaminOnoEquation",
    "IntermediateLongWaveEquation",
    "EquationSpec",
    "dispersion_values",
    "apply_group",
    "free_trajectory",
    "nonlinearity",
    "nonlinearity_trajectory",
    "duhamel",
    "duhamel_trajectory",
    "picard_map",
]


@dataclass
class GenericEquation:
    """Odd-order dispersive equation with a general quadratic nonlinearity.

    ``coeffs`` maps ordered derivative pairs (j1, j2) to their coefficient;
    the nonlinearity is the plain sum over these ordered pairs (no implicit
    symmetrization, so {(0,1): -6} means -6 u u_x, not -3 d_x(u^2)).
    """

    disp_order: int
    coeffs: Dict[Tuple[int, int], complex] = dataclass_field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.disp_order < 1:
            raise ValueError(f"dispersion order must be >= 1, got {self.disp_order}")
        for (j1, j2) in self.coeffs:
            if j1 < 0 or j2 < 0 or j1 + j2 > 2 * self.disp_order:
                raise ValueError(
                    f"coefficient index ({j1},{j2}) outside "
                    f"0 <= j1+j2 <= {2 * self.disp_order}")


@dataclass(frozen=True)
class BenjaminOnoEquation:
    """Higher-order Benjamin-Ono model.

    b and eps must be positive (they set the dispersion); the nonlinear
    coefficients c, d may be zero so individual terms can be isolated.
    """

    a: float
    b: float
    c: float
    d: float
    eps: float

    def __post_init__(self) -> None:
        for name in ("b", "eps"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("c", "d"):
            if getattr(self, name) < 0:
                raise ValueError(
                    f"{name} must be nonnegative, got {getattr(self, name)}")

    @property
    def disp_order(self) -> int:
        return 1


@dataclass(frozen=True)
class IntermediateLongWaveEquation:
    """Higher-order intermediate-long-wave model on depth ``depth`` > 0."""

    a1: float
    a2: float
    b: float
    c: float
    d: float
    depth: float
    eps: float

    def __post_init__(self) -> None:
        for name in ("b", "depth", "eps"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("a1", "a2", "c", "d"):
            if getattr(self, name) < 0:
                raise ValueError(
                    f"{name} must be nonnegative, got {getattr(self, name)}")

    @property
    def disp_order(self) -> int:
        return 1


EquationSpec = Union[GenericEquation, BenjaminOnoEquation, IntermediateLongWaveEquation]


def dispersion_values(eq: EquationSpec, xi: np.ndarray) -> np.ndarray:
    """The real phase omega(xi) with u-hat(t) = exp(i omega t) u-hat(0)."""
    xi = np.asarray(xi, dtype=float)
    if isinstance(eq, GenericEquation):
        j = eq.disp_order
        return (-1.0) ** (j + 1) * xi ** (2 * j + 1)
    if isinstance(eq, BenjaminOnoEquation):
        return eq.b * np.abs(xi) * xi + eq.a * eq.eps * xi**3
    if isinstance(eq, IntermediateLongWaveEquation):
        with np.errstate(invalid="ignore"):
            c1 = coth(eq.depth * xi)
            values = eq.b * c1 * xi**2 + (eq.a1 * c1**2 + eq.a2) * eq.eps * xi**3
        # both terms extend continuously by 0 through xi = 0
        return np.where(xi == 0.0, 0.0, values)
    raise TypeError(f"unknown equation type {type(eq).__name__}")


def apply_group(eq: EquationSpec, t: float, f: SpectralField) -> SpectralField:
    omega = dispersion_values(eq, f.grid.wavenumbers)
    return f.with_coeffs(np.exp(1j * omega * t) * f.coeffs)


def free_trajectory(eq: EquationSpec, u0: SpectralField, times: np.ndarray) -> Trajectory:
    times = np.asarray(times, dtype=float)
    omega = dispersion_values(eq, u0.grid.wavenumbers)
    phases = np.exp(1j * np.outer(times, omega))
    return Trajectory(u0.grid, times, phases * u0.coeffs[None, :])


def _shear_nonlinearity(u: SpectralField, steepening: float, correction: float,
                        symbol: MultiplierSymbol) -> SpectralField:
    """c u u_x - correction * d_x(u (S u_x) + S(u u_x)) for a transform S."""
    du = derivative(u)
    u_du = pointwise_product(u, du)
    inner = pointwise_product(u, apply_multiplier(du, symbol)) + \
        apply_multiplier(u_du, symbol)
    return steepening * u_du - correction * derivative(inner)


def nonlinearity(eq: EquationSpec, u: SpectralField) -> SpectralField:
    if isinstance(eq, GenericEquation):
        total = u.grid.zero_field()
        for (j1, j2), a in eq.coeffs.items():
            total = total + a * pointwise_product(derivative(u, j1),
                                                  derivative(u, j2))
        return total
    if isinstance(eq, BenjaminOnoEquation):
        return _shear_nonlinearity(u, eq.c, eq.d * eq.eps, hilbert_symbol())
    if isinstance(eq, IntermediateLongWaveEquation):
        return _shear_nonlinearity(u, eq.c, eq.d * eq.eps,
                                   depth_averaged_symbol(eq.depth))
    raise TypeError(f"unknown equation type {type(eq).__name__}")


def nonlinearity_trajectory(eq: EquationSpec, traj: Trajectory) -> Trajectory:
    return traj.map_fields(lambda f: nonlinearity(eq, f))


def duhamel_trajectory(eq: EquationSpec, forcing: Trajectory) -> Trajectory:
    """integral_0^{t_n} group(t_n - t') forcing(t') dt' at every node."""
    omega = dispersion_values(eq, forcing.grid.wavenumbers)
    times = forcing.times
    i0 = forcing.zero_time_index()
    w = np.exp(-1j * np.outer(times, omega)) * forcing.coeffs
    dt = forcing.dt
    # prefix sums of trapezoid segments, anchored so the t=0 node is zero
    segments = 0.5 * dt * (w[:-1] + w[1:])
    prefix = np.vstack([np.zeros_like(w[0]), np.cumsum(segments, axis=0)])
    integral = prefix - prefix[i0]
    return Trajectory(forcing.grid, times,
                      np.exp(1j * np.outer(times, omega)) * integral)


def duhamel(eq: EquationSpec, forcing: Trajectory, t_index: int) -> SpectralField:
    if not 0 <= t_index < forcing.n_times:
        raise IndexError(
            f"t_index {t_index} outside trajectory of {forcing.n_times} nodes")
    return duhamel_trajectory(eq, forcing).field(t_index)


def picard_map(eq: EquationSpec, u0: SpectralField, traj: Trajectory) -> Trajectory:
    """One application of the integral-equation map F to the iterate ``traj``."""
    if u0.grid != traj.grid:
        raise ValueError("initial data and trajectory live on different grids")
    free = free_trajectory(eq, u0, traj.times)
    forced = duhamel_trajectory(eq, nonlinearity_trajectory(eq, traj))
    return Trajectory(traj.grid, traj.times, free.coeffs + forced.coeffs)
