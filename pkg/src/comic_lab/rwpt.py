"""Random-walk particle tracking and histogram binning into concentrations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import AdeParams, ObservationSet

__all__ = [
    "ParticleEnsemble",
    "BinGrid",
    "simulate_rwpt",
    "bin_concentrations",
    "default_grid",
]


@dataclass
class ParticleEnsemble:
    """Particle positions and masses; total mass is the sum of masses."""

    positions: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        self.masses = np.asarray(self.masses, dtype=float)
        if self.positions.ndim != 1 or self.positions.size < 1:
            raise ValueError("positions must be a 1-D array with n >= 1")
        if self.masses.shape != self.positions.shape:
            raise ValueError("positions and masses must have matching shapes")
        if np.any(self.masses < 0):
            raise ValueError("particle masses must be non-negative")

    @property
    def n(self) -> int:
        return self.positions.size

    @property
    def m_total(self) -> float:
        return float(self.masses.sum())


@dataclass(frozen=True)
class BinGrid:
    """Non-overlapping half-open bins [left_i, left_i + width_i).

    By default bins are centered on ``centers``; ``left_edges`` may be given
    explicitly for midpoint-edge grids on irregular centers, where strictly
    centered bins of the same widths would overlap.
    """

    centers: np.ndarray
    widths: np.ndarray
    left_edges: np.ndarray = None

    def __post_init__(self):
        centers = np.asarray(self.centers, dtype=float)
        widths = np.asarray(self.widths, dtype=float)
        if centers.ndim != 1 or centers.size < 1:
            raise ValueError("centers must be a 1-D array with at least one bin")
        if widths.shape != centers.shape:
            raise ValueError("centers and widths must have matching shapes")
        if np.any(widths <= 0):
            raise ValueError("bin widths must be positive")
        if self.left_edges is None:
            left = centers - widths / 2
        else:
            left = np.asarray(self.left_edges, dtype=float)
            if left.shape != centers.shape:
                raise ValueError("left_edges and centers must have matching shapes")
        order = np.argsort(left)
        tol = 1e-12 * np.maximum(widths[order][:-1], 1.0) if centers.size > 1 else 0.0
        if centers.size > 1 and np.any(
            left[order][:-1] + widths[order][:-1] > left[order][1:] + tol
        ):
            raise ValueError("bins overlap")
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "widths", widths)
        object.__setattr__(self, "left_edges", left)

    @property
    def k(self) -> int:
        return self.centers.size


def simulate_rwpt(params: AdeParams, n: int, dt: float = 0.1, seed: int = 0) -> ParticleEnsemble:
    """Propagate n equal-mass particles from x0 to time T by random walks.

    Every step adds ``v*dt + sqrt(2*D*dt)*xi`` with fresh standard-Normal xi
    per particle; T/dt is treated as an integer step count with the last step
    truncated to land exactly on T. Deterministic for a given seed.
    """
    if n < 1:
        raise ValueError(f"need at least one particle, got n={n}")
    if dt <= 0:
        raise ValueError(f"time step must be positive, got dt={dt}")
    rng = np.random.default_rng(seed)
    positions = np.full(n, params.x0, dtype=float)
    remaining = params.T
    while remaining > 1e-15 * params.T:
        h = min(dt, remaining)
        positions += params.v * h + np.sqrt(2.0 * params.D * h) * rng.standard_normal(n)
        remaining -= h
    return ParticleEnsemble(positions, np.full(n, 1.0 / n))


def bin_concentrations(ensemble: ParticleEnsemble, grid: BinGrid) -> np.ndarray:
    """Histogram concentrations c(x_i) = n_i / (n * dx_i) at the bin centers.

    A particle on a bin edge belongs to the right bin. Particles outside
    every bin are ignored.
    """
    counts = _bin_counts(ensemble.positions, grid)
    return counts / (ensemble.n * grid.widths)


def _bin_counts(positions: np.ndarray, grid: BinGrid) -> np.ndarray:
    left = grid.left_edges
    right = left + grid.widths
    counts = np.empty(grid.k, dtype=np.int64)
    for i in range(grid.k):
        counts[i] = np.count_nonzero((positions >= left[i]) & (positions < right[i]))
    return counts


def default_grid(observations: ObservationSet) -> BinGrid:
    """Bins around the observation locations with edges at neighbor midpoints.

    Interior widths are the half-distances to both neighbors summed; end bins
    are extended symmetrically (full gap to the single neighbor), so the bins
    tile the span plus one half-gap beyond each end.
    """
    x = observations.locations
    if x.size < 2:
        raise ValueError("need at least two observation locations to build a grid")
    gaps = np.diff(x)
    edges = np.concatenate(([x[0] - gaps[0] / 2], x[:-1] + gaps / 2, [x[-1] + gaps[-1] / 2]))
    return BinGrid(x.copy(), np.diff(edges), left_edges=edges[:-1])
