"""Analytic 1-D advection-diffusion solution and synthetic observation data.

The transport model is dc/dt = -v dc/dx + D d2c/dx2 on an effectively
infinite line with a unit Dirac release at ``x0``, so the solution at time
``t`` is the Gaussian Green's function centered at ``x0 + v*t`` with
variance ``2*D*t``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "AdeParams",
    "Domain",
    "NoiseSpec",
    "ObservationSet",
    "analytic_concentration",
    "synthesize_observations",
]


@dataclass(frozen=True)
class AdeParams:
    """Physical model: velocity, diffusion coefficient, release point, final time."""

    v: float
    D: float
    x0: float
    T: float

    def __post_init__(self):
        if not self.D > 0:
            raise ValueError(f"diffusion coefficient must be positive, got D={self.D}")
        if not self.T > 0:
            raise ValueError(f"final time must be positive, got T={self.T}")


@dataclass(frozen=True)
class Domain:
    """Spatial interval [lo, hi]."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"domain requires lo < hi, got [{self.lo}, {self.hi}]")

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def contains(self, x) -> bool:
        return bool(np.all((np.asarray(x) >= self.lo) & (np.asarray(x) <= self.hi)))


@dataclass(frozen=True)
class NoiseSpec:
    """Multiplicative Gaussian noise: std of a sample at x is alpha*c(x,T)."""

    alpha: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")


@dataclass(frozen=True)
class ObservationSet:
    """Concentration data: strictly increasing locations with values >= 0."""

    locations: np.ndarray
    values: np.ndarray
    spacing_mode: str = "uniform"
    noise: NoiseSpec = field(default_factory=NoiseSpec)

    def __post_init__(self):
        loc = np.asarray(self.locations, dtype=float)
        val = np.asarray(self.values, dtype=float)
        if loc.ndim != 1 or loc.size < 1:
            raise ValueError("locations must be a 1-D array with k >= 1")
        if val.shape != loc.shape:
            raise ValueError("locations and values must have matching shapes")
        if loc.size > 1 and not np.all(np.diff(loc) > 0):
            raise ValueError("locations must be strictly increasing")
        if np.any(val < 0):
            raise ValueError("concentration values must be non-negative")
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "values", val)

    @property
    def k(self) -> int:
        return self.locations.size


def analytic_concentration(params: AdeParams, x, t: float):
    """Green's-function concentration at position(s) ``x`` and time ``t``.

    Returns ``exp(-(x - x0 - v*t)**2 / (4*D*t)) / sqrt(4*pi*D*t)``; accepts
    scalar or array ``x``.
    """
    if not t > 0:
        raise ValueError(f"time must be positive, got t={t}")
    if not params.D > 0:
        raise ValueError(f"diffusion coefficient must be positive, got D={params.D}")
    x = np.asarray(x, dtype=float)
    spread = 4.0 * params.D * t
    arg = x - params.x0 - params.v * t
    out = np.exp(-(arg * arg) / spread) / np.sqrt(np.pi * spread)
    return out if out.ndim else float(out)


def _draw_nonnegative(rng: np.random.Generator, mean: np.ndarray, std: np.ndarray) -> np.ndarray:
    """Sample Normal(mean, std) per point, redrawing negatives until all >= 0."""
    values = rng.normal(mean, std)
    bad = values < 0
    while np.any(bad):
        values[bad] = rng.normal(mean[bad], std[bad])
        bad = values < 0
    return values


def synthesize_observations(
    params: AdeParams,
    domain: Domain,
    k: int,
    spacing_mode: str = "uniform",
    noise: NoiseSpec = NoiseSpec(),
) -> ObservationSet:
    """Sample k concentration observations of the analytic solution at time T.

    Uniform spacing is endpoint-inclusive; random locations are drawn
    uniformly over the domain and sorted. With ``noise.alpha > 0`` each value
    is Normal(c, alpha*c) truncated to non-negative by redrawing, so k is
    preserved. Fully deterministic given ``noise.seed``.
    """
    if k < 1:
        raise ValueError(f"need at least one observation point, got k={k}")
    if spacing_mode not in ("uniform", "random"):
        raise ValueError(f"unknown spacing_mode {spacing_mode!r}")

    rng = np.random.default_rng(noise.seed)
    if spacing_mode == "uniform":
        locations = np.linspace(domain.lo, domain.hi, k)
    else:
        locations = np.sort(rng.uniform(domain.lo, domain.hi, k))

    exact = np.atleast_1d(analytic_concentration(params, locations, params.T))
    if noise.alpha == 0:
        values = exact.copy()
    else:
        values = _draw_nonnegative(rng, exact, noise.alpha * exact)
    return ObservationSet(locations, values, spacing_mode, noise)
