"""Time-sampled fields on a shared grid.

A trajectory stores u(t_n) for a uniform time grid as one coefficient matrix
(one row per time node), which keeps Duhamel sums and space-time norms
vectorized. Grids may be one-sided (starting at 0) or two-sided (centered at
0); operations that integrate from t = 0 locate that node explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from displab.grid import SpectralField, TorusGrid

__all__ = ["Trajectory", "uniform_times"]


def uniform_times(start: float, stop: float, n_nodes: int) -> np.ndarray:
    if n_nodes < 2:
        raise ValueError(f"a time grid needs at least 2 nodes, got {n_nodes}")
    if not stop > start:
        raise ValueError(f"empty time interval [{start}, {stop}]")
    return np.linspace(start, stop, n_nodes)


@dataclass
class Trajectory:
    grid: TorusGrid
    times: np.ndarray
    coeffs: np.ndarray  # shape (n_times, n_modes), complex, FFT order

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=float)
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.times.ndim != 1 or self.times.size < 2:
            raise ValueError("time grid must be 1-d with at least 2 nodes")
        if self.coeffs.shape != (self.times.size, self.grid.n_modes):
            raise ValueError(
                f"coefficient matrix shape {self.coeffs.shape} does not match "
                f"{self.times.size} times x {self.grid.n_modes} modes"
            )
        steps = np.diff(self.times)
        if not np.all(steps > 0):
            raise ValueError("time grid must be strictly increasing")
        if np.max(np.abs(steps - steps[0])) > 1e-9 * max(steps[0], 1e-300):
            raise ValueError("time grid must be uniform")

    @property
    def n_times(self) -> int:
        return self.times.size

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def field(self, index: int) -> SpectralField:
        return SpectralField(self.grid, self.coeffs[index].copy())

    def zero_time_index(self) -> int:
        """Index of the t = 0 node; error if the grid does not contain it."""
        idx = int(np.argmin(np.abs(self.times)))
        if abs(self.times[idx]) > 1e-12 * max(1.0, abs(self.times).max()):
            raise ValueError("time grid does not contain t = 0")
        return idx

    def initial_field(self) -> SpectralField:
        return self.field(self.zero_time_index())

    def physical(self) -> np.ndarray:
        """Matrix of physical samples, one row per time node."""
        twisted = self.grid._center_phase[None, :] * self.coeffs
        return np.fft.ifft(twisted, axis=1) / self.grid.dx

    def filtered(self, symbol_values: np.ndarray) -> "Trajectory":
        """Apply a fixed multiplier (given as values on the grid) at every time."""
        return Trajectory(self.grid, self.times, symbol_values[None, :] * self.coeffs)

    def map_fields(self, fn: Callable[[SpectralField], SpectralField]) -> "Trajectory":
        rows = [fn(self.field(i)).coeffs for i in range(self.n_times)]
        return Trajectory(self.grid, self.times, np.stack(rows))

    def __sub__(self, other: "Trajectory") -> "Trajectory":
        if self.grid != other.grid or self.times.shape != other.times.shape or \
                not np.allclose(self.times, other.times, rtol=0, atol=1e-12):
            raise ValueError("trajectories live on different grids")
        return Trajectory(self.grid, self.times, self.coeffs - other.coeffs)

    @staticmethod
    def from_fields(times: np.ndarray, fields: Sequence[SpectralField]) -> "Trajectory":
        if len(fields) != len(times):
            raise ValueError("one field per time node required")
        grid = fields[0].grid
        return Trajectory(grid, np.asarray(times, dtype=float),
                          np.stack([f.coeffs for f in fields]))

    @staticmethod
    def constant(times: np.ndarray, field: SpectralField) -> "Trajectory":
        times = np.asarray(times, dtype=float)
        return Trajectory(field.grid, times,
                          np.tile(field.coeffs, (times.size, 1)))
