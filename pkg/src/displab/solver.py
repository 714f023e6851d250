"""Small-data fixed-point solver and an independent time-stepping oracle.

``picard_solve`` iterates the integral-equation map starting from the free
evolution, monitoring the distance between successive iterates in the
block-weighted space-time norm (or its balanced variant). Quadratic
nonlinearities make the map a contraction for small data on short windows,
so distances should decay geometrically; three consecutive increases are
reported as divergence rather than raised, because a divergent run is an
informative outcome for the experiments built on top.

``reference_solve`` is a deliberately different discretization of the same
initial-value problem: classical fourth-order Runge-Kutta composed with the
exact per-mode integrating factor exp(i omega t). The linear flow is
reproduced exactly; everything else converges at fourth order, which makes it
a useful cross-check oracle for the Picard trajectory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from displab.dyadic import DyadicDecomposition
from displab.equations import (
    EquationSpec,
    apply_group,
    dispersion_values,
    free_trajectory,
    nonlinearity,
    picard_map,
)
from displab.grid import SpectralField, l2_norm
from displab.norms import (
    besov_norm,
    lambda_ratio,
    weighted_besov_norm,
    x_norm,
    xt_seminorms,
    xts_seminorms,
)
from displab.trajectory import Trajectory

__all__ = [
    "SolveConfig",
    "SolveReport",
    "BlowUpError",
    "smallness_beta",
    "suggest_horizon",
    "picard_solve",
    "reference_solve",
]


class BlowUpError(RuntimeError):
    """Raised when the reference integrator produces non-finite values."""

    def __init__(self, time: float) -> None:
        self.time = time
        super().__init__(
            f"reference integration produced non-finite values at t={time:g}")


@dataclass(frozen=True)
class SolveConfig:
    """Iteration window and stopping policy.

    ``dt`` must divide ``horizon`` so the time grid lands exactly on the
    endpoint. ``norm_mode`` selects the contraction metric: "x_t" for the
    five-seminorm sum, "y_ts" for the balanced norm at Sobolev index ``s``.
    ``c_hat`` is the empirical constant in the suggested-horizon formula; it
    is advisory and never enforced.
    """

    horizon: float
    dt: float
    max_iter: int = 50
    tol: float = 1e-10
    norm_mode: str = "x_t"
    s: float = 2.75
    c_hat: float = 1.0

    def __post_init__(self) -> None:
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        steps = self.horizon / self.dt
        if abs(steps - round(steps)) > 1e-9:
            raise ValueError(
                f"dt={self.dt} does not divide horizon={self.horizon}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.norm_mode not in ("x_t", "y_ts"):
            raise ValueError(f"unknown norm_mode {self.norm_mode!r}")
        if not self.c_hat > 0:
            raise ValueError(f"c_hat must be positive, got {self.c_hat}")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))


@dataclass
class SolveReport:
    converged: bool
    diverged: bool
    iterations: int
    distances: list
    ratios: list
    beta: float
    norm_mode: str
    trajectory: Trajectory
    divergence_reason: str = ""

    def to_json_dict(self) -> dict:
        return {
            "converged": self.converged,
            "diverged": self.diverged,
            "divergence_reason": self.divergence_reason,
            "iterations": self.iterations,
            "distances": [float(d) for d in self.distances],
            "ratios": [float(r) for r in self.ratios],
            "beta": float(self.beta),
            "norm_mode": self.norm_mode,
            "trajectory": {
                "n_times": int(self.trajectory.n_times),
                "final_time": float(self.trajectory.times[-1]),
                "n_modes": int(self.trajectory.grid.n_modes),
                "half_length": float(self.trajectory.grid.half_length),
                "final_l2": float(l2_norm(self.trajectory.field(-1))),
            },
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_json_dict(), **kwargs)

    def distance_rows(self) -> list:
        rows = []
        for n, d in enumerate(self.distances):
            ratio = self.ratios[n - 1] if n >= 1 else ""
            rows.append([n, d, ratio])
        return rows


def smallness_beta(u0: SpectralField, disp_order: int,
                   decomp: DyadicDecomposition | None = None) -> float:
    """The data size that controls the contraction window:
    l^1-Besov of order 2j+1/4 plus the weighted l^1-Besov of order 1/4."""
    decomp = decomp or DyadicDecomposition(u0.grid)
    return (besov_norm(u0, 2 * disp_order + 0.25, q=1, decomp=decomp)
            + weighted_besov_norm(u0, 0.25, q=1, decomp=decomp))


def suggest_horizon(u0: SpectralField, disp_order: int, c_hat: float = 1.0,
                    decomp: DyadicDecomposition | None = None) -> float:
    """Advisory contraction window 1 / (4 c_hat sqrt(beta))."""
    if l2_norm(u0) == 0.0:
        raise ValueError("suggested horizon is undefined for zero data")
    return 1.0 / (4.0 * c_hat * np.sqrt(smallness_beta(u0, disp_order, decomp)))


def picard_solve(eq: EquationSpec, u0: SpectralField, config: SolveConfig,
                 decomp: DyadicDecomposition | None = None) -> SolveReport:
    decomp = decomp or DyadicDecomposition(u0.grid)
    j = eq.disp_order
    times = np.linspace(0.0, config.horizon, config.n_steps + 1)
    with np.errstate(over="ignore"):
        beta = smallness_beta(u0, j, decomp)

    if config.norm_mode == "y_ts" and l2_norm(u0) > 0.0:
        balance = lambda_ratio(u0, config.s, j, decomp)
    else:
        balance = 0.0

    def distance(a: Trajectory, b: Trajectory) -> float:
        diff = a - b
        value = xt_seminorms(diff, j, decomp).total
        if balance > 0.0:
            value += balance * xts_seminorms(diff, config.s, j, decomp).total
        return value

    current = free_trajectory(eq, u0, times)
    distances: list = []
    ratios: list = []
    for iteration in range(1, config.max_iter + 1):
        # overflow of a diverging iterate is an expected, reported outcome
        with np.errstate(over="ignore", invalid="ignore"):
            nxt = picard_map(eq, u0, current)
        if not np.all(np.isfinite(nxt.coeffs)):
            return SolveReport(False, True, iteration, distances, ratios,
                               beta, config.norm_mode, current,
                               divergence_reason="non-finite iterate")
        with np.errstate(over="ignore"):
            d = distance(nxt, current)
        distances.append(d)
        if len(distances) >= 2:
            prev = distances[-2]
            ratios.append(d / prev if prev > 0 else np.inf)
        current = nxt
        if d <= config.tol:
            return SolveReport(True, False, iteration, distances, ratios,
                               beta, config.norm_mode, current)
        if len(distances) >= 4 and all(
                distances[-k] > distances[-k - 1] for k in (1, 2, 3)):
            return SolveReport(False, True, iteration, distances, ratios,
                               beta, config.norm_mode, current,
                               divergence_reason="3 consecutive rising distances")
    return SolveReport(False, False, config.max_iter, distances, ratios,
                       beta, config.norm_mode, current,
                       divergence_reason="max_iter reached")


def reference_solve(eq: EquationSpec, u0: SpectralField, horizon: float,
                    dt: float, store_stride: int = 1) -> Trajectory:
    """Integrating-factor RK4 from t=0 to t=horizon, storing every
    ``store_stride``-th step (the endpoint is always stored)."""
    if not horizon > 0 or not dt > 0:
        raise ValueError("horizon and dt must be positive")
    n_steps = int(round(horizon / dt))
    if abs(n_steps * dt - horizon) > 1e-9 * horizon or n_steps < 1:
        raise ValueError(f"dt={dt} does not divide horizon={horizon}")
    if n_steps % store_stride != 0:
        raise ValueError("store_stride must divide the number of steps")

    grid = u0.grid
    omega = dispersion_values(eq, grid.wavenumbers)
    half = np.exp(1j * omega * dt / 2.0)
    full = half * half

    def rhs(coeffs: np.ndarray) -> np.ndarray:
        return nonlinearity(eq, SpectralField(grid, coeffs)).coeffs

    stored = [u0.coeffs.copy()]
    u = u0.coeffs.copy()
    for n in range(n_steps):
        # overflow on the way to the BlowUpError check is expected
        with np.errstate(over="ignore", invalid="ignore"):
            k1 = rhs(u)
            k2 = rhs(half * (u + 0.5 * dt * k1))
            k3 = rhs(half * u + 0.5 * dt * k2)
            k4 = rhs(full * u + dt * half * k3)
            u = full * u + dt / 6.0 * (full * k1 + 2.0 * half * (k2 + k3) + k4)
        if not np.all(np.isfinite(u)):
            raise BlowUpError((n + 1) * dt)
        if (n + 1) % store_stride == 0:
            stored.append(u.copy())
    times = np.linspace(0.0, horizon, len(stored))
    return Trajectory(grid, times, np.stack(stored))
