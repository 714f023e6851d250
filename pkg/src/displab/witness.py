"""Frequency-side witnesses for the failure of smooth data-to-solution maps.

The counterexample construction pairs a packet of width ``alpha`` near
frequency 0 with one near a large frequency N. The quadratic interaction of
their free evolutions creates output in a third band near N whose H^s norm,
evaluated in closed form as a 1-D oscillatory integral, grows like a power of
N. Fitting that power against the prediction is the point of this module;
resolving alpha = N^{-2j-eps} on a torus would need half-lengths of order
N^{2j+eps}, so quadrature on the frequency side is the only practical route
for large N (a small-N torus oracle cross-checks the normalization).

``frechet_check`` probes the same mechanism from the solver side: the mixed
second difference of the flow map at the origin converges, at rate O(delta),
to the bilinear Duhamel term that the witness integral evaluates.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple

import numpy as np

from displab.equations import (
    BenjaminOnoEquation,
    EquationSpec,
    GenericEquation,
    IntermediateLongWaveEquation,
    apply_group,
    dispersion_values,
    duhamel_trajectory,
    nonlinearity,
)
from displab.grid import SpectralField, TorusGrid, coth, l2_norm
from displab.trajectory import Trajectory

__all__ = [
    "WitnessConfig",
    "FrequencyProfile",
    "WitnessPair",
    "GrowthFitReport",
    "FrechetReport",
    "q_poly",
    "resonance",
    "oscillatory_factor",
    "witness_pair",
    "overlap_length",
    "second_iterate_transform",
    "witness_norm",
    "growth_scan",
    "bilinear_duhamel",
    "frechet_check",
]


def q_poly(disp_order: int, xi, xi1):
    """The resonance cofactor Q_{2j}(xi, xi1) = sum_{l=0}^{2j}
    ((-1)^l C(2j, l) - 1) xi^{2j-l} xi1^l, so that
    xi1^{2j+1} + (xi - xi1)^{2j+1} - xi^{2j+1} = (xi - xi1) Q_{2j}(xi, xi1)."""
    if disp_order < 1:
        raise ValueError(f"dispersion order must be >= 1, got {disp_order}")
    xi = np.asarray(xi, dtype=float)
    xi1 = np.asarray(xi1, dtype=float)
    two_j = 2 * disp_order
    total = np.zeros(np.broadcast(xi, xi1).shape)
    for l in range(two_j + 1):
        coeff = (-1) ** l * math.comb(two_j, l) - 1
        if coeff != 0:
            total = total + coeff * xi ** (two_j - l) * xi1**l
    return total


def resonance(eq: EquationSpec, xi, xi1):
    """omega(xi1) + omega(xi - xi1) - omega(xi), the phase that controls the
    strength of the quadratic interaction at output frequency xi.

    For the generic family the factored form (xi - xi1) Q_{2j}(xi, xi1) is
    used; it is identical in exact arithmetic but avoids the cancellation of
    terms of size xi^{2j+1} that ruins the direct sum at large frequencies."""
    xi = np.asarray(xi, dtype=float)
    xi1 = np.asarray(xi1, dtype=float)
    if isinstance(eq, GenericEquation):
        sign = (-1.0) ** (eq.disp_order + 1)
        return sign * (xi - xi1) * q_poly(eq.disp_order, xi, xi1)
    return (dispersion_values(eq, xi1) + dispersion_values(eq, xi - xi1)
            - dispersion_values(eq, xi))


def oscillatory_factor(theta):
    """(e^{i theta} - 1) / (i theta), normalized to 1 at theta = 0.

    Evaluated as e^{i theta/2} sinc(theta / 2 pi), which is exact for every
    theta and needs no small-angle branch."""
    theta = np.asarray(theta, dtype=float)
    return np.exp(0.5j * theta) * np.sinc(theta / (2.0 * np.pi))


_GAUSS_CACHE: dict = {}


def _gauss_rule(order: int) -> Tuple[np.ndarray, np.ndarray]:
    if order not in _GAUSS_CACHE:
        _GAUSS_CACHE[order] = np.polynomial.legendre.leggauss(order)
    return _GAUSS_CACHE[order]


def _centered_resonance(eq: EquationSpec, xi, xi1, xi2):
    """resonance(eq, xi, xi1) rewritten for the witness band, where
    xi = xi1 + xi2, all three frequencies are positive, and xi2 = O(alpha)
    is passed at full precision. The direct sum of dispersion values loses
    the small resonance to rounding once the terms reach xi^{2j+1} in size;
    these forms are algebraically identical and cancellation free."""
    if isinstance(eq, GenericEquation):
        sign = (-1.0) ** (eq.disp_order + 1)
        return sign * xi2 * q_poly(eq.disp_order, xi, xi1)
    if isinstance(eq, BenjaminOnoEquation):
        return -xi1 * xi2 * (2.0 * eq.b + 3.0 * eq.a * eq.eps * xi)
    h = eq.depth
    cx, cx1, cx2 = coth(h * xi), coth(h * xi1), coth(h * xi2)
    # coth(h xi1) - coth(h xi) = sinh(h xi2) / (sinh(h xi1) sinh(h xi)).
    # Writing each sinh as e^y (1 - e^{-2y}) / 2 and cancelling the growing
    # exponentials leaves only decaying ones, so nothing overflows at any
    # depth: the difference is 2 e^{-2 h xi1} (1 - e^{-2 h xi2}) divided by
    # (1 - e^{-2 h xi1})(1 - e^{-2 h xi}).
    dcoth = -2.0 * np.exp(-2.0 * h * xi1) * np.expm1(-2.0 * h * xi2) / (
        np.expm1(-2.0 * h * xi1) * np.expm1(-2.0 * h * xi))
    b_part = eq.b * (cx2 * xi2**2 - cx1 * xi2 * (xi1 + xi) + xi**2 * dcoth)
    a1_part = eq.a1 * (cx2**2 * xi2**3
                       - cx1**2 * xi2 * (xi1**2 + xi1 * xi + xi**2)
                       + xi**3 * (cx1 + cx) * dcoth)
    a2_part = -3.0 * eq.a2 * xi * xi1 * xi2
    return b_part + eq.eps * (a1_part + a2_part)


@dataclass(frozen=True)
class FrequencyProfile:
    """A piecewise-constant frequency-side profile: amplitude on [lo, hi)."""

    pieces: Tuple[Tuple[float, float, float], ...]

    def __post_init__(self) -> None:
        for lo, hi, _ in self.pieces:
            if not hi > lo:
                raise ValueError(f"empty profile piece [{lo}, {hi})")

    def h_s_norm(self, s: float) -> float:
        """Continuum H^s norm, (1/2pi integral (1+xi^2)^s |profile|^2)^{1/2},
        by exact interval integrals (Gauss-Legendre per piece)."""
        nodes, weights = _gauss_rule(64)
        total = 0.0
        for lo, hi, amp in self.pieces:
            xi = 0.5 * (hi + lo) + 0.5 * (hi - lo) * nodes
            total += amp**2 * 0.5 * (hi - lo) * np.sum(
                weights * (1.0 + xi**2) ** s)
        return float(np.sqrt(total / (2.0 * np.pi)))

    def sample(self, grid: TorusGrid) -> SpectralField:
        """Indicator sampled on the grid frequencies, half-open in [lo, hi)."""
        coeffs = np.zeros(grid.n_modes, dtype=complex)
        for lo, hi, amp in self.pieces:
            mask = (grid.wavenumbers >= lo) & (grid.wavenumbers < hi)
            coeffs[mask] = amp
        return SpectralField(grid, coeffs)

    def positive_amplitude(self) -> float:
        for lo, _, amp in self.pieces:
            if lo > 0:
                return amp
        raise ValueError("profile has no positive-frequency piece")


@dataclass(frozen=True)
class WitnessPair:
    low: FrequencyProfile
    high: FrequencyProfile


@dataclass(frozen=True)
class WitnessConfig:
    """Parameters of one witness evaluation.

    ``equation`` fixes the dispersion and the interaction kernel. The generic
    family needs ``steepening_order`` (the k of the u d^k u term, k larger
    than the dispersion order); the Benjamin-Ono and intermediate-long-wave
    families take their kernel from the equation constants instead. The
    packet width is always derived: alpha = N^{-(2j + epsilon)}.
    """

    equation: EquationSpec
    wave_number: float
    sobolev_index: float = 0.0
    epsilon: float = 0.5
    time: float = 1.0
    steepening_order: Optional[int] = None
    real_valued: bool = False
    n_outer: int = 256
    n_inner: int = 64

    def __post_init__(self) -> None:
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if not self.wave_number > 1.0:
            raise ValueError(
                f"wave number must exceed 1, got {self.wave_number}")
        if isinstance(self.equation, GenericEquation):
            k = self.steepening_order
            if k is None:
                raise ValueError("the generic family needs a steepening order")
            if k <= self.equation.disp_order:
                raise ValueError(
                    f"steepening order {k} must exceed the dispersion "
                    f"order {self.equation.disp_order}")
            if self.equation.coeffs.get((0, k), 0.0) == 0.0:
                raise ValueError(
                    f"equation has no u d^{k}u term to witness")
        elif self.steepening_order is not None:
            raise ValueError(
                "steepening order applies only to the generic family")
        if self.n_outer < 3 or self.n_inner < 2:
            raise ValueError("quadrature orders too small")
        if not self.time > 0.0:
            raise ValueError(f"time must be positive, got {self.time}")
        band = self.wave_number ** -(
            2 * self.equation.disp_order + self.epsilon)
        if band < 256.0 * np.spacing(self.wave_number):
            raise ValueError(
                f"interaction band of width {band:.3e} is narrower than "
                f"256 ulp at wave number {self.wave_number:g}; this scan "
                "range outruns double precision")

    @property
    def alpha(self) -> float:
        j = self.equation.disp_order
        return float(self.wave_number ** -(2 * j + self.epsilon))

    @property
    def predicted_exponent(self) -> float:
        if isinstance(self.equation, GenericEquation):
            return (self.steepening_order - self.equation.disp_order
                    - self.epsilon / 2.0)
        return 1.0 - self.epsilon / 2.0

    @property
    def support(self) -> Tuple[float, float]:
        """Frequency band carrying the low-high interaction output."""
        n, a = self.wave_number, self.alpha
        return (n + 0.5 * a, n + 2.0 * a)


def witness_pair(cfg: WitnessConfig) -> WitnessPair:
    a = cfg.alpha
    n = cfg.wave_number
    amp_low = a**-0.5
    amp_high = a**-0.5 * n**-cfg.sobolev_index
    if cfg.real_valued:
        low = FrequencyProfile(((-a, -a / 2, amp_low / 2),
                                (a / 2, a, amp_low / 2)))
        high = FrequencyProfile(((-(n + a), -n, amp_high / 2),
                                 (n, n + a, amp_high / 2)))
    else:
        low = FrequencyProfile(((a / 2, a, amp_low),))
        high = FrequencyProfile(((n, n + a, amp_high),))
    return WitnessPair(low, high)


def overlap_length(cfg: WitnessConfig, xi) -> np.ndarray:
    """Length of the inner integration interval: the trapezoid profile of
    the convolution of the two packet indicators."""
    xi = np.asarray(xi, dtype=float)
    n, a = cfg.wave_number, cfg.alpha
    return np.clip(np.minimum(n + a, xi - a / 2) - np.maximum(n, xi - a), 0.0, None)


def _interaction_weight(cfg: WitnessConfig, xi: np.ndarray,
                        xi1: np.ndarray) -> np.ndarray:
    """Kernel of the quadratic interaction at (output, inner) frequencies,
    matching the implemented nonlinearities term by term."""
    eq = cfg.equation
    if isinstance(eq, GenericEquation):
        k = cfg.steepening_order
        coeff = eq.coeffs[(0, k)]
        return np.broadcast_to(coeff * (1j * xi) ** k,
                               np.broadcast(xi, xi1).shape)
    if isinstance(eq, BenjaminOnoEquation):
        shear = eq.c * xi1 - eq.d * eq.eps * (
            xi * np.abs(xi1) + np.abs(xi) * xi1)
        return 1j * shear
    shear = eq.c * xi1 - eq.d * eq.eps * xi * xi1 * (
        coth(eq.depth * xi1) + coth(eq.depth * xi))
    return 1j * shear


def second_iterate_transform(cfg: WitnessConfig, xi, time: float) -> np.ndarray:
    """Closed-form frequency transform of the low-high part of the second
    Picard iterate at output frequency xi:

        weight(xi) e^{i omega(xi) t} amp_low amp_high / (2 pi)
            * integral over the overlap of t-scaled oscillatory factors,

    Gauss-Legendre in the inner variable with the order doubled until the
    value moves by less than 1e-10 relative. Outside the interaction band the
    transform is exactly zero.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    out = np.zeros(xi.shape, dtype=complex)
    n, a = cfg.wave_number, cfg.alpha
    # Work in the offset u = xi1 - N. The band quantities are O(alpha) and
    # the offsets keep full relative precision where absolute frequencies
    # near N would be rounded to ulp(N), which matters for j >= 2.
    dxi = xi - n
    ulo = np.maximum(0.0, dxi - a)
    uhi = np.minimum(a, dxi - a / 2)
    inside = uhi > ulo
    if not np.any(inside):
        return out
    xi_in, dxi = xi[inside], dxi[inside]
    ulo, uhi = ulo[inside], uhi[inside]
    pair = witness_pair(cfg)
    amps = pair.low.positive_amplitude() * pair.high.positive_amplitude()
    eq = cfg.equation

    def evaluate(order: int) -> np.ndarray:
        nodes, weights = _gauss_rule(order)
        u = 0.5 * (uhi + ulo)[:, None] + 0.5 * (uhi - ulo)[:, None] * nodes[None, :]
        xi1 = n + u
        res = _centered_resonance(eq, xi_in[:, None], xi1, dxi[:, None] - u)
        integrand = _interaction_weight(cfg, xi_in[:, None], xi1) * \
            time * oscillatory_factor(time * res)
        return 0.5 * (uhi - ulo) * np.sum(weights[None, :] * integrand, axis=1)

    order = cfg.n_inner
    value = evaluate(order)
    while order < 8192:
        order *= 2
        refined = evaluate(order)
        scale = max(float(np.max(np.abs(refined))), 1e-300)
        if np.max(np.abs(refined - value)) <= 1e-10 * scale:
            value = refined
            break
        value = refined

    omega = dispersion_values(cfg.equation, xi_in)
    out[inside] = np.exp(1j * omega * time) * amps / (2.0 * np.pi) * value
    return out


def witness_norm(cfg: WitnessConfig, time: Optional[float] = None) -> float:
    """H^s norm of the interaction band of the second iterate,
    (1/2pi integral (1+xi^2)^s |transform|^2 dxi)^{1/2}, by Gauss-Legendre
    on the three panels where the overlap profile is smooth."""
    if time is None:
        time = cfg.time
    n, a = cfg.wave_number, cfg.alpha
    breakpoints = (n + a / 2, n + a, n + 1.5 * a, n + 2 * a)
    per_panel = max(2, -(-cfg.n_outer // 3))
    nodes, weights = _gauss_rule(per_panel)
    total = 0.0
    for left, right in zip(breakpoints[:-1], breakpoints[1:]):
        xi = 0.5 * (right + left) + 0.5 * (right - left) * nodes
        values = second_iterate_transform(cfg, xi, time)
        total += 0.5 * (right - left) * np.sum(
            weights * (1.0 + xi**2) ** cfg.sobolev_index * np.abs(values) ** 2)
    return float(np.sqrt(total / (2.0 * np.pi)))


@dataclass(frozen=True)
class GrowthFitReport:
    """Log-log growth fit of the witness norm across wave numbers."""

    wave_numbers: Tuple[float, ...]
    alphas: Tuple[float, ...]
    norms: Tuple[float, ...]
    time: float
    predicted_exponent: float
    slope: float
    residual: float

    @staticmethod
    def csv_header() -> list:
        return ["N", "alpha", "norm", "predicted_exponent", "slope", "residual"]

    def csv_rows(self) -> list:
        return [
            [n, a, v, self.predicted_exponent, self.slope, self.residual]
            for n, a, v in zip(self.wave_numbers, self.alphas, self.norms)
        ]

    def to_json_dict(self) -> dict:
        return {
            "wave_numbers": list(self.wave_numbers),
            "alphas": list(self.alphas),
            "norms": list(self.norms),
            "time": self.time,
            "predicted_exponent": self.predicted_exponent,
            "slope": self.slope,
            "residual": self.residual,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_json_dict(), **kwargs)


def growth_scan(cfg: WitnessConfig,
                wave_numbers: Sequence[float]) -> GrowthFitReport:
    if len(wave_numbers) < 4:
        raise ValueError(
            f"growth scan needs at least 4 wave numbers, got {len(wave_numbers)}")
    norms = []
    alphas = []
    for n in wave_numbers:
        scan_cfg = replace(cfg, wave_number=float(n))
        alphas.append(scan_cfg.alpha)
        norms.append(witness_norm(scan_cfg))
    log_n = np.log(np.asarray(wave_numbers, dtype=float))
    log_v = np.log(np.asarray(norms))
    slope, intercept = np.polyfit(log_n, log_v, 1)
    fitted = slope * log_n + intercept
    residual = float(np.sqrt(np.mean((log_v - fitted) ** 2)))
    return GrowthFitReport(
        wave_numbers=tuple(float(n) for n in wave_numbers),
        alphas=tuple(alphas),
        norms=tuple(norms),
        time=cfg.time,
        predicted_exponent=cfg.predicted_exponent,
        slope=float(slope),
        residual=residual,
    )


def bilinear_duhamel(eq: EquationSpec, phi: SpectralField, psi: SpectralField,
                     times: np.ndarray) -> Trajectory:
    """The cross (bilinear) part of the second Picard iterate,
    integral of U(t - t') [N(U phi + U psi) - N(U phi) - N(U psi)] dt',
    evaluated node by node on the given time grid."""
    rows = []
    for t in times:
        a = apply_group(eq, float(t), phi)
        b = apply_group(eq, float(t), psi)
        cross = nonlinearity(eq, a + b) - nonlinearity(eq, a) - nonlinearity(eq, b)
        rows.append(cross.coeffs)
    forcing = Trajectory(phi.grid, times, np.stack(rows))
    return duhamel_trajectory(eq, forcing)


@dataclass(frozen=True)
class FrechetReport:
    """Finite-difference probes of the flow map's derivatives at zero data."""

    deltas: Tuple[float, ...]
    first_errors: Tuple[float, ...]
    second_errors: Tuple[float, ...]
    converged: Tuple[bool, ...]

    @staticmethod
    def csv_header() -> list:
        return ["delta", "first_difference_error", "second_difference_error",
                "converged"]

    def csv_rows(self) -> list:
        return [
            [d, f, s, c]
            for d, f, s, c in zip(self.deltas, self.first_errors,
                                  self.second_errors, self.converged)
        ]

    def to_json_dict(self) -> dict:
        return {
            "deltas": list(self.deltas),
            "first_errors": list(self.first_errors),
            "second_errors": list(self.second_errors),
            "converged": list(self.converged),
        }


def frechet_check(eq: EquationSpec, phi: SpectralField, psi: SpectralField,
                  time: float, deltas: Sequence[float],
                  dt: Optional[float] = None, tol: float = 1e-12,
                  max_iter: int = 60) -> FrechetReport:
    """Check the two derivative identities of the flow map S at the origin:
    S(delta phi)/delta -> U(t) phi and the mixed second difference
    [S(delta(phi+psi)) - S(delta phi) - S(delta psi)]/delta^2 -> the bilinear
    Duhamel term, both at rate O(delta). Divergent solves are reported as
    skipped rows rather than raised."""
    from displab.solver import SolveConfig, picard_solve

    if phi.grid != psi.grid:
        raise ValueError("witness fields live on different grids")
    if dt is None:
        dt = time / 64.0
    config = SolveConfig(horizon=time, dt=dt, max_iter=max_iter, tol=tol)
    times = np.linspace(0.0, time, config.n_steps + 1)
    linear_ref = apply_group(eq, time, phi)
    bilinear_ref = bilinear_duhamel(eq, phi, psi, times).field(-1)
    # errors are relative when the reference is nonzero, absolute otherwise
    # (a linear equation has an identically zero bilinear term)
    linear_scale = l2_norm(linear_ref) or 1.0
    bilinear_scale = l2_norm(bilinear_ref) or 1.0

    first_errors, second_errors, flags = [], [], []
    for delta in deltas:
        solves = [picard_solve(eq, delta * u0, config)
                  for u0 in (phi, psi, phi + psi)]
        if not all(s.converged for s in solves):
            first_errors.append(float("nan"))
            second_errors.append(float("nan"))
            flags.append(False)
            continue
        end_phi, end_psi, end_sum = (s.trajectory.field(-1) for s in solves)
        first = (1.0 / delta) * end_phi - linear_ref
        second = (1.0 / delta**2) * (end_sum - end_phi - end_psi) - bilinear_ref
        first_errors.append(l2_norm(first) / linear_scale)
        second_errors.append(l2_norm(second) / bilinear_scale)
        flags.append(True)
    return FrechetReport(
        deltas=tuple(float(d) for d in deltas),
        first_errors=tuple(first_errors),
        second_errors=tuple(second_errors),
        converged=tuple(flags),
    )
