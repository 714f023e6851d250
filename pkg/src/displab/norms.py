"""Norms and seminorms: Sobolev, weighted Sobolev, Besov, mixed space-time,
and the block-weighted space-time families the contraction argument runs in.

Conventions:

* All L^2 quantities follow the grid's Plancherel pairing, so values are
  comparable with whole-line closed forms.
* Block sums run over the low-pass part S0 plus blocks l = 1 .. l_max. The
  low-pass term always enters with weight 1.
* Time integrals use the trapezoid rule on the trajectory's stored grid;
  time suprema are maxima over stored nodes.
* Weighted ("x-weighted") quantities multiply by the centered coordinate on
  the physical side after block filtering: they measure ||x * (Delta_l u)||.

The two space-time families, for dispersion order j (an equation of order
2j + 1):

* ``xt_seminorms``: five components with l^1 block aggregation and weights
  2^{(2j+1/4)l}, 2^{l/4}, 2^{(3j+1/4)l}, 2^{(j+1/4)l}, 1 on the norms
  sup_t L^2_x, sup_t L^2_x (x-weighted), sup_x L^2_t,
  sup_x L^2_t (x-weighted), L^1_x sup_t. Their sum is the contraction norm.
* ``xts_seminorms``: four components with l^2 block aggregation and weights
  4^{sl}, 4^{(s-2j)l}, 4^{(s+j)l}, 4^{(s-j)l} on the first four norms above.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from displab.dyadic import DyadicDecomposition
from displab.grid import (
    SpectralField,
    boundary_mass_fraction,
    derivative,
    l2_norm,
    multiply_by_x,
)
from displab.trajectory import Trajectory

__all__ = [
    "sobolev_norm",
    "weighted_sobolev_norm",
    "besov_norm",
    "weighted_besov_norm",
    "mixed_norm",
    "XtSeminorms",
    "XtsSeminorms",
    "xt_seminorms",
    "xts_seminorms",
    "x_norm",
    "lambda_ratio",
    "y_norm",
    "NormReport",
    "sobolev_report",
    "weighted_sobolev_report",
    "besov_report",
    "weighted_besov_report",
]


# ---------------------------------------------------------------------------
# static (single-field) norms
# ---------------------------------------------------------------------------

def sobolev_norm(field: SpectralField, s: float) -> float:
    xi = field.grid.wavenumbers
    weight = (1.0 + xi**2) ** s
    total = np.sum(weight * np.abs(field.coeffs) ** 2) / (2 * field.grid.half_length)
    return float(np.sqrt(total))


def weighted_sobolev_norm(field: SpectralField, order: int) -> float:
    """sum_{l=0..order} ||x * d^l f / dx^l||_{L^2}."""
    if order < 0:
        raise ValueError(f"derivative order must be nonnegative, got {order}")
    return float(sum(
        l2_norm(multiply_by_x(derivative(field, l))) for l in range(order + 1)
    ))


def _block_l2(field: SpectralField, decomp: DyadicDecomposition, x_weight: bool):
    """(||S0 f||, [||Delta_l f|| for l = 1..l_max]), optionally x-weighted."""
    def nrm(f: SpectralField) -> float:
        return l2_norm(multiply_by_x(f) if x_weight else f)
    low = nrm(decomp.low_pass(field))
    blocks = [nrm(decomp.block(field, l)) for l in range(1, decomp.l_max + 1)]
    return low, np.array(blocks)


def _aggregate_besov(low: float, blocks: np.ndarray, s: float, q: int) -> float:
    l = np.arange(1, blocks.size + 1)
    if q == 1:
        return float(low + np.sum(2.0 ** (s * l) * blocks))
    if q == 2:
        return float(np.sqrt(low**2 + np.sum(4.0 ** (s * l) * blocks**2)))
    raise ValueError(f"unsupported Besov aggregation q={q}; use 1 or 2")


def besov_norm(field: SpectralField, s: float, q: int = 2,
               decomp: DyadicDecomposition | None = None) -> float:
    decomp = decomp or DyadicDecomposition(field.grid)
    low, blocks = _block_l2(field, decomp, x_weight=False)
    return _aggregate_besov(low, blocks, s, q)


def weighted_besov_norm(field: SpectralField, s: float, q: int = 2,
                        decomp: DyadicDecomposition | None = None) -> float:
    decomp = decomp or DyadicDecomposition(field.grid)
    low, blocks = _block_l2(field, decomp, x_weight=True)
    return _aggregate_besov(low, blocks, s, q)


# ---------------------------------------------------------------------------
# mixed space-time norms
# ---------------------------------------------------------------------------

_SPACE_EXPONENTS = (1, 2, 4, np.inf)
_TIME_EXPONENTS = (2, np.inf)


def _time_weights(times: np.ndarray) -> np.ndarray:
    dt = times[1] - times[0]
    w = np.full(times.size, dt)
    w[0] = w[-1] = dt / 2.0
    return w


def _space_reduce(values: np.ndarray, p: float, dx: float, axis: int) -> np.ndarray:
    if p == 1:
        return dx * np.sum(values, axis=axis)
    if p == 2:
        return np.sqrt(dx * np.sum(values**2, axis=axis))
    if p == 4:
        return (dx * np.sum(values**4, axis=axis)) ** 0.25
    return np.max(values, axis=axis)


def _time_reduce(values: np.ndarray, q: float, weights: np.ndarray,
                 axis: int) -> np.ndarray:
    if q == 2:
        shape = [1] * values.ndim
        shape[axis] = weights.size
        return np.sqrt(np.sum(weights.reshape(shape) * values**2, axis=axis))
    return np.max(values, axis=axis)


def mixed_norm(traj: Trajectory, space_exponent: float, time_exponent: float,
               order: str = "space_outer", x_weight: bool = False) -> float:
    """L^p_x L^q_t (order="space_outer") or L^q_t L^p_x (order="time_outer")."""
    if space_exponent not in _SPACE_EXPONENTS:
        raise ValueError(
            f"unsupported space exponent {space_exponent}; use 1, 2, 4, or inf")
    if time_exponent not in _TIME_EXPONENTS:
        raise ValueError(
            f"unsupported time exponent {time_exponent}; use 2 or inf")
    if order not in ("space_outer", "time_outer"):
        raise ValueError(f"unknown composition order {order!r}")
    mag = np.abs(traj.physical())  # (n_t, n_x)
    if x_weight:
        mag = mag * np.abs(traj.grid.x)[None, :]
    tw = _time_weights(traj.times)
    if order == "space_outer":
        per_x = _time_reduce(mag, time_exponent, tw, axis=0)
        return float(_space_reduce(per_x, space_exponent, traj.grid.dx, axis=0))
    per_t = _space_reduce(mag, space_exponent, traj.grid.dx, axis=1)
    return float(_time_reduce(per_t, time_exponent, tw, axis=0))


# ---------------------------------------------------------------------------
# block-weighted space-time seminorm families
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class XtSeminorms:
    sup_l2: float
    sup_l2_weighted: float
    smoothing: float
    smoothing_weighted: float
    maximal: float

    @property
    def total(self) -> float:
        return (self.sup_l2 + self.sup_l2_weighted + self.smoothing
                + self.smoothing_weighted + self.maximal)


@dataclass(frozen=True)
class XtsSeminorms:
    sup_l2: float
    sup_l2_weighted: float
    smoothing: float
    smoothing_weighted: float

    @property
    def total(self) -> float:
        return (self.sup_l2 + self.sup_l2_weighted + self.smoothing
                + self.smoothing_weighted)


def _per_block_spacetime(traj: Trajectory, symbol_values: np.ndarray,
                         time_weights: np.ndarray):
    """The five elementary space-time norms of one filtered trajectory.

    Returns (sup_t L2_x, same x-weighted, sup_x L2_t, same x-weighted,
    L1_x sup_t)."""
    coeffs = symbol_values[None, :] * traj.coeffs
    twisted = traj.grid._center_phase[None, :] * coeffs
    p = np.abs(np.fft.ifft(twisted, axis=1) / traj.grid.dx)
    xp = p * np.abs(traj.grid.x)[None, :]
    dx = traj.grid.dx
    n1 = float(np.max(np.sqrt(dx * np.sum(p**2, axis=1))))
    n2 = float(np.max(np.sqrt(dx * np.sum(xp**2, axis=1))))
    p1 = float(np.max(np.sqrt(np.sum(time_weights[:, None] * p**2, axis=0))))
    p2 = float(np.max(np.sqrt(np.sum(time_weights[:, None] * xp**2, axis=0))))
    m = float(dx * np.sum(np.max(p, axis=0)))
    return n1, n2, p1, p2, m


def _blockwise_table(traj: Trajectory, decomp: DyadicDecomposition) -> np.ndarray:
    """Rows: S0, Delta_1 .. Delta_lmax; columns: the five elementary norms."""
    tw = _time_weights(traj.times)
    rows = [_per_block_spacetime(traj, decomp.low_values, tw)]
    for l in range(1, decomp.l_max + 1):
        rows.append(_per_block_spacetime(traj, decomp.block_values[l], tw))
    return np.array(rows)


def xt_seminorms(traj: Trajectory, disp_order: int,
                 decomp: DyadicDecomposition | None = None) -> XtSeminorms:
    decomp = decomp or DyadicDecomposition(traj.grid)
    table = _blockwise_table(traj, decomp)
    l = np.arange(1, decomp.l_max + 1)
    j = disp_order
    weights = [2.0 ** ((2 * j + 0.25) * l), 2.0 ** (0.25 * l),
               2.0 ** ((3 * j + 0.25) * l), 2.0 ** ((j + 0.25) * l),
               np.ones_like(l, dtype=float)]
    vals = [table[0, c] + float(np.sum(w * table[1:, c]))
            for c, w in enumerate(weights)]
    return XtSeminorms(*vals)


def xts_seminorms(traj: Trajectory, s: float, disp_order: int,
                  decomp: DyadicDecomposition | None = None) -> XtsSeminorms:
    decomp = decomp or DyadicDecomposition(traj.grid)
    table = _blockwise_table(traj, decomp)
    l = np.arange(1, decomp.l_max + 1)
    j = disp_order
    exponents = [s, s - 2 * j, s + j, s - j]
    vals = [table[0, c] + float(np.sqrt(np.sum(4.0 ** (e * l) * table[1:, c] ** 2)))
            for c, e in enumerate(exponents)]
    return XtsSeminorms(*vals)


def x_norm(traj: Trajectory, disp_order: int,
           decomp: DyadicDecomposition | None = None) -> float:
    """The contraction norm: sum of the five xt seminorms."""
    return xt_seminorms(traj, disp_order, decomp).total


def lambda_ratio(initial: SpectralField, s: float, disp_order: int,
                 decomp: DyadicDecomposition | None = None) -> float:
    """Balance factor between the two seminorm families.

    numerator:   l^1-Besov pair of the data (orders 2j+1/4 and weighted 1/4)
    denominator: H^s plus the weighted l^2-Besov of order s-2j
    """
    decomp = decomp or DyadicDecomposition(initial.grid)
    if l2_norm(initial) == 0.0:
        raise ZeroDivisionError("lambda ratio is undefined for zero initial data")
    j = disp_order
    num = (besov_norm(initial, 2 * j + 0.25, q=1, decomp=decomp)
           + weighted_besov_norm(initial, 0.25, q=1, decomp=decomp))
    den = (sobolev_norm(initial, s)
           + weighted_besov_norm(initial, s - 2 * j, q=2, decomp=decomp))
    return num / den


def y_norm(traj: Trajectory, s: float, disp_order: int,
           decomp: DyadicDecomposition | None = None,
           balance: float | None = None) -> float:
    """x_norm + lambda * xts_total, with lambda taken from the t=0 slice
    unless supplied (a solver keeps it fixed across iterates)."""
    decomp = decomp or DyadicDecomposition(traj.grid)
    if balance is None:
        balance = lambda_ratio(traj.initial_field(), s, disp_order, decomp)
    return (xt_seminorms(traj, disp_order, decomp).total
            + balance * xts_seminorms(traj, s, disp_order, decomp).total)


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NormReport:
    """One norm evaluation with its per-block breakdown.

    ``blocks`` holds the weighted contributions (b0 = low-pass term first);
    ``value`` equals their declared aggregation ("sum" or "rss"). The
    boundary-mass fraction of the measured field is carried along so that
    x-weighted values can be judged for torus-truncation validity (they are
    only trustworthy below 1e-6).
    """

    name: str
    value: float
    l_max: int
    boundary_mass: float
    blocks: tuple
    aggregation: str

    def aggregated(self) -> float:
        b = np.asarray(self.blocks)
        return float(np.sum(b)) if self.aggregation == "sum" else float(
            np.sqrt(np.sum(b**2)))

    @staticmethod
    def csv_header(l_max: int) -> list:
        return (["name", "value", "l_max", "boundary_mass"]
                + [f"b{l}" for l in range(l_max + 1)])

    def csv_row(self) -> list:
        padded = list(self.blocks) + [0.0] * (self.l_max + 1 - len(self.blocks))
        return [self.name, self.value, self.l_max, self.boundary_mass] + padded


def _report(name, value, decomp, field, blocks, aggregation) -> NormReport:
    return NormReport(name=name, value=float(value), l_max=decomp.l_max,
                      boundary_mass=boundary_mass_fraction(field),
                      blocks=tuple(float(b) for b in blocks),
                      aggregation=aggregation)


def sobolev_report(field: SpectralField, s: float,
                   decomp: DyadicDecomposition | None = None,
                   name: str | None = None) -> NormReport:
    """H^s with a breakdown over sharp disjoint octaves (so rss is exact)."""
    decomp = decomp or DyadicDecomposition(field.grid)
    xi = field.grid.wavenumbers
    density = (1.0 + xi**2) ** s * np.abs(field.coeffs) ** 2 / (
        2 * field.grid.half_length)
    a = np.abs(xi)
    blocks = [np.sqrt(np.sum(density[a <= 1.0]))]
    for l in range(1, decomp.l_max + 1):
        hi = np.inf if l == decomp.l_max else 2.0**l
        blocks.append(np.sqrt(np.sum(density[(a > 2.0 ** (l - 1)) & (a <= hi)])))
    return _report(name or f"sobolev(s={s:g})", np.sqrt(np.sum(density)),
                   decomp, field, blocks, "rss")


def weighted_sobolev_report(field: SpectralField, order: int,
                            decomp: DyadicDecomposition | None = None,
                            name: str | None = None) -> NormReport:
    decomp = decomp or DyadicDecomposition(field.grid)
    parts = [l2_norm(multiply_by_x(derivative(field, l))) for l in range(order + 1)]
    return _report(name or f"weighted_sobolev(k={order})", sum(parts),
                   decomp, field, parts, "sum")


def besov_report(field: SpectralField, s: float, q: int = 2,
                 decomp: DyadicDecomposition | None = None,
                 name: str | None = None) -> NormReport:
    decomp = decomp or DyadicDecomposition(field.grid)
    low, raw = _block_l2(field, decomp, x_weight=False)
    return _besov_report_common(field, decomp, low, raw, s, q,
                                name or f"besov(s={s:g},q={q})")


def weighted_besov_report(field: SpectralField, s: float, q: int = 2,
                          decomp: DyadicDecomposition | None = None,
                          name: str | None = None) -> NormReport:
    decomp = decomp or DyadicDecomposition(field.grid)
    low, raw = _block_l2(field, decomp, x_weight=True)
    return _besov_report_common(field, decomp, low, raw, s, q,
                                name or f"weighted_besov(s={s:g},q={q})")


def _besov_report_common(field, decomp, low, raw, s, q, name) -> NormReport:
    l = np.arange(1, raw.size + 1)
    weighted = list(2.0 ** (s * l) * raw)
    value = _aggregate_besov(low, raw, s, q)
    return _report(name, value, decomp, field, [low] + weighted,
                   "sum" if q == 1 else "rss")
