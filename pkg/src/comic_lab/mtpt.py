"""Mass-transfer particle tracking.

Particles are advected deterministically and exchange mass through a
symmetric Gaussian kernel normalized by particle density:

    W_ij = (1 / sqrt(4*pi*D*dt)) * exp(-s_ij^2 / (4*D*dt)) / rho_ij

with ``rho_ij`` the mean particle density n/|Omega| by default, or the
symmetric local density 0.5*(1/dV_i + 1/dV_j) built from Voronoi lengths
when per-particle volumes are supplied. A transfer step updates all masses
simultaneously:

    m_i <- m_i - sum_j (m_i - m_j) W_ij

which conserves total mass exactly because W is symmetric.

Three evaluation strategies sit behind the same kernel interface: a dense
matrix for small n, an FFT Toeplitz convolution for evenly spaced particles,
and a distance-truncated banded loop (numba) for large irregular clouds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
from scipy.signal import fftconvolve

from .model import AdeParams, Domain
from .rwpt import ParticleEnsemble

__all__ = [
    "PlacementSpec",
    "TransferKernel",
    "MtptResult",
    "init_ensemble",
    "local_volumes",
    "build_transfer_weights",
    "mtpt_step",
    "simulate_mtpt",
]

# Dense matrices are exact but O(n^2) memory; above this particle count the
# structured strategies take over.
DENSE_LIMIT = 2500

# Banded strategy drops pair interactions beyond this many kernel bandwidths;
# exp(-cutoff^2/2) ~ 4e-6 of the peak weight at the default.
DEFAULT_CUTOFF_SIGMAS = 5.0


@dataclass(frozen=True)
class PlacementSpec:
    """Initial particle placement: evenly spaced or iid uniform (sorted)."""

    mode: str = "uniform"
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("uniform", "random"):
            raise ValueError(f"unknown placement mode {self.mode!r}")


def init_ensemble(
    domain: Domain,
    n: int,
    placement: PlacementSpec,
    x0: float,
    release: str = "nearest",
) -> ParticleEnsemble:
    """Pre-distribute n zero-mass particles and release unit mass at x0.

    ``release="nearest"`` puts the whole unit mass on the particle closest to
    x0 (ties to the lower index). ``release="split"`` divides it linearly
    between the two bracketing particles, which preserves the center of mass
    exactly and removes the O(spacing) release-offset bias; estimation
    pipelines use the split mode.
    """
    if n < 2:
        raise ValueError(f"mass transfer needs at least two particles, got n={n}")
    if not domain.contains(x0):
        raise ValueError(f"release point {x0} outside domain [{domain.lo}, {domain.hi}]")
    if placement.mode == "uniform":
        positions = np.linspace(domain.lo, domain.hi, n)
    else:
        rng = np.random.default_rng(placement.seed)
        positions = np.sort(rng.uniform(domain.lo, domain.hi, n))
    masses = np.zeros(n)
    if release == "nearest":
        masses[int(np.argmin(np.abs(positions - x0)))] = 1.0
    elif release == "split":
        j = int(np.searchsorted(positions, x0))
        if j == 0:
            masses[0] = 1.0
        elif j == n:
            masses[-1] = 1.0
        else:
            gap = positions[j] - positions[j - 1]
            a = (x0 - positions[j - 1]) / gap if gap > 0 else 0.0
            masses[j - 1] = 1.0 - a
            masses[j] = a
    else:
        raise ValueError(f"unknown release mode {release!r}")
    return ParticleEnsemble(positions, masses)


def local_volumes(positions: np.ndarray, domain: Domain) -> np.ndarray:
    """Voronoi lengths of sorted particle positions within the domain.

    Interior particles get half the gap to each neighbor; end particles get
    the half-gap to their single neighbor plus the distance to the domain
    boundary. The volumes always partition the domain length exactly.
    """
    x = np.asarray(positions, dtype=float)
    if x.ndim != 1 or x.size < 1:
        raise ValueError("positions must be a 1-D array with n >= 1")
    if x.size > 1 and np.any(np.diff(x) < 0):
        raise ValueError("positions must be sorted ascending")
    if x.size == 1:
        return np.array([domain.length])
    mid = (x[:-1] + x[1:]) / 2
    edges = np.concatenate(([domain.lo], mid, [domain.hi]))
    return np.diff(edges)


@numba.njit(cache=True, fastmath=True)
def _banded_row_sums(x, inv_vol, hi, coef, inv4):
    n = x.size
    r = np.zeros(n)
    for i in range(n):
        xi = x[i]
        ivi = inv_vol[i]
        for j in range(i + 1, hi[i]):
            dx = x[j] - xi
            w = coef * np.exp(-dx * dx * inv4) * 2.0 / (ivi + inv_vol[j])
            r[i] += w
            r[j] += w
    return r


@numba.njit(cache=True, fastmath=True)
def _banded_apply(x, m, inv_vol, hi, coef, inv4, scale):
    n = x.size
    dm = np.zeros(n)
    for i in range(n):
        xi = x[i]
        mi = m[i]
        ivi = inv_vol[i]
        for j in range(i + 1, hi[i]):
            dx = x[j] - xi
            w = coef * np.exp(-dx * dx * inv4) * 2.0 / (ivi + inv_vol[j])
            f = w * (m[j] - mi)
            dm[i] += f
            dm[j] -= f
    return m + scale * dm


class TransferKernel:
    """Symmetric mass-transfer weights for a fixed particle configuration.

    Exposes the effective (stability-clamped) weights, their row sums, and a
    simultaneous transfer step. If any raw row sum exceeds 1 the whole kernel
    is rescaled by the maximum row sum so no particle can shed more mass than
    it holds in a single step; ``clamp_scale`` records the applied factor.
    """

    def __init__(
        self,
        positions: np.ndarray,
        D: float,
        dt: float,
        normalization,
        cutoff_sigmas: float = DEFAULT_CUTOFF_SIGMAS,
        dense_limit: int = DENSE_LIMIT,
    ):
        positions = np.asarray(positions, dtype=float)
        if positions.ndim != 1 or positions.size < 2:
            raise ValueError("positions must be a 1-D array with n >= 2")
        if not np.all(np.isfinite(positions)):
            raise ValueError("positions must be finite")
        if dt <= 0:
            raise ValueError(f"transfer step must be positive, got dt={dt}")
        if D <= 0:
            raise ValueError(f"diffusion coefficient must be positive, got D={D}")

        n = positions.size
        self.positions = positions
        self.D = float(D)
        self.dt = float(dt)
        self._coef = 1.0 / np.sqrt(4.0 * np.pi * D * dt)
        self._inv4 = 1.0 / (4.0 * D * dt)

        if np.isscalar(normalization):
            if normalization <= 0:
                raise ValueError("density normalization must be positive")
            self.normalization = "constant-density"
            self._inv_vol = np.full(n, float(normalization))
        else:
            vols = np.asarray(normalization, dtype=float)
            if vols.shape != positions.shape or np.any(vols <= 0):
                raise ValueError("local volumes must be positive and match positions")
            self.normalization = "local-volume"
            self._inv_vol = 1.0 / vols

        gaps = np.diff(positions)
        uniform = gaps.size > 0 and np.allclose(gaps, gaps[0], rtol=1e-9, atol=0.0)
        if n <= dense_limit:
            self.strategy = "dense"
        elif uniform and self.normalization == "constant-density":
            self.strategy = "toeplitz"
        else:
            if np.any(gaps < 0):
                raise ValueError("banded kernels require sorted positions")
            self.strategy = "banded"

        if self.strategy == "dense":
            dx = positions[:, None] - positions[None, :]
            K = self._coef * np.exp(-dx * dx * self._inv4)
            np.fill_diagonal(K, 0.0)
            self._W = K * (2.0 / (self._inv_vol[:, None] + self._inv_vol[None, :]))
            self._row_sums_raw = self._W.sum(axis=1)
        elif self.strategy == "toeplitz":
            h = (positions[-1] - positions[0]) / (n - 1)
            d = np.arange(n) * h
            kvec = self._coef * np.exp(-d * d * self._inv4) / self._inv_vol[0]
            kvec[0] = 0.0
            self._kvec = kvec
            cum = np.concatenate(([0.0], np.cumsum(kvec[1:])))
            idx = np.arange(n)
            self._row_sums_raw = cum[idx] + cum[n - 1 - idx]
            self._ksym = np.concatenate((kvec[::-1], kvec[1:]))
        else:
            cutoff = cutoff_sigmas * np.sqrt(2.0 * D * dt)
            self._hi = np.searchsorted(positions, positions + cutoff).astype(np.int64)
            self._row_sums_raw = _banded_row_sums(
                positions, self._inv_vol, self._hi, self._coef, self._inv4
            )

        max_row = float(self._row_sums_raw.max())
        self.clamp_scale = 1.0 / max_row if max_row > 1.0 else 1.0

    @property
    def n(self) -> int:
        return self.positions.size

    def row_sums(self) -> np.ndarray:
        """Effective per-particle transfer budget sum_{j != i} W_ij."""
        return self._row_sums_raw * self.clamp_scale

    @property
    def weights(self) -> np.ndarray:
        """Effective dense weight matrix (materialized; small n only)."""
        if self.n > 20_000:
            raise MemoryError("weight matrix too large to materialize")
        if self.strategy == "dense":
            return self._W * self.clamp_scale
        dx = self.positions[:, None] - self.positions[None, :]
        K = self._coef * np.exp(-dx * dx * self._inv4)
        np.fill_diagonal(K, 0.0)
        W = K * (2.0 / (self._inv_vol[:, None] + self._inv_vol[None, :]))
        return W * self.clamp_scale

    @property
    def distances(self) -> np.ndarray:
        """Pairwise particle distances s_ij (small n only)."""
        return np.abs(self.positions[:, None] - self.positions[None, :])

    def apply(self, masses: np.ndarray) -> np.ndarray:
        """One simultaneous transfer step from the old masses."""
        m = np.asarray(masses, dtype=float)
        if m.shape != self.positions.shape:
            raise ValueError("masses must match the kernel's particle count")
        if self.strategy == "dense":
            return m + self.clamp_scale * (self._W @ m - self._row_sums_raw * m)
        if self.strategy == "toeplitz":
            wm = fftconvolve(m, self._ksym, mode="same")
            return m + self.clamp_scale * (wm - self._row_sums_raw * m)
        return _banded_apply(
            self.positions, m, self._inv_vol, self._hi, self._coef, self._inv4,
            self.clamp_scale,
        )


def build_transfer_weights(
    positions: np.ndarray,
    D: float,
    dt: float,
    normalization,
    cutoff_sigmas: float = DEFAULT_CUTOFF_SIGMAS,
    dense_limit: int = DENSE_LIMIT,
) -> TransferKernel:
    """Build the normalized Gaussian transfer kernel for fixed positions.

    ``normalization`` is either a scalar particle density rho (evenly spaced
    particles, W_ij = K_ij / rho) or an array of per-particle local volumes,
    which yields the symmetric pairwise density 0.5*(1/dV_i + 1/dV_j).
    """
    return TransferKernel(positions, D, dt, normalization, cutoff_sigmas, dense_limit)


def mtpt_step(masses: np.ndarray, kernel: TransferKernel) -> np.ndarray:
    """Apply one mass-transfer step; total mass is conserved."""
    return kernel.apply(masses)


@dataclass
class MtptResult:
    """Final state of a mass-transfer simulation."""

    positions: np.ndarray
    masses: np.ndarray
    concentrations: np.ndarray
    local_volumes: np.ndarray
    clamp_scale: float
    has_negative_mass: bool

    @property
    def m_total(self) -> float:
        return float(self.masses.sum())


def simulate_mtpt(
    params: AdeParams,
    n: int,
    dt: float = 0.1,
    placement: PlacementSpec = PlacementSpec(),
    domain: Domain = Domain(-5.0, 5.0),
    release: str = "nearest",
    cutoff_sigmas: float = DEFAULT_CUTOFF_SIGMAS,
    dense_limit: int = DENSE_LIMIT,
) -> MtptResult:
    """Run mass transfer to time T and return concentrations per particle.

    Particles shift rigidly by v*dt each step, so pair distances never change
    and the kernel is built once (twice if T/dt leaves a truncated last
    step). The run is fully deterministic given the placement seed.

    The kernel is normalized by the mean particle density n/|Omega| for both
    placement modes. Concentrations are masses over a constant sampling
    volume (the actual mean spacing, see below) rather than per-particle
    Voronoi volumes: Voronoi division would double the estimate at uniform
    end particles (whose cell is half-width) and, under random placement,
    inject ~70% spacing noise that never averages out as n grows. Voronoi
    volumes remain the right quadrature weights for integral criteria and
    are reported in ``local_volumes`` for that use.
    """
    ensemble = init_ensemble(domain, n, placement, params.x0, release)
    positions = ensemble.positions
    masses = ensemble.masses

    normalization = n / domain.length

    n_full = int(np.floor(params.T / dt + 1e-9))
    remainder = params.T - n_full * dt
    if remainder < 1e-12 * params.T:
        remainder = 0.0

    clamp_scale = 1.0
    negative = False
    if n_full > 0:
        kernel = build_transfer_weights(
            positions, params.D, dt, normalization, cutoff_sigmas, dense_limit
        )
        clamp_scale = min(clamp_scale, kernel.clamp_scale)
        for _ in range(n_full):
            masses = kernel.apply(masses)
            negative = negative or bool(np.any(masses < 0))
    if remainder > 0:
        kernel = build_transfer_weights(
            positions, params.D, remainder, normalization, cutoff_sigmas, dense_limit
        )
        clamp_scale = min(clamp_scale, kernel.clamp_scale)
        masses = kernel.apply(masses)
        negative = negative or bool(np.any(masses < 0))

    volumes = local_volumes(positions, domain)
    # Masses settle toward c(x)/rho_eff with rho_eff the actual spacing
    # density: (n-1)/|Omega| for an endpoint-inclusive uniform grid, n/|Omega|
    # in the mean for random placement (total mass fixes the scale).
    rho_eff = (n - 1) / domain.length if placement.mode == "uniform" else n / domain.length
    concentrations = masses * rho_eff
    return MtptResult(
        positions=positions + params.v * params.T,
        masses=masses,
        concentrations=concentrations,
        local_volumes=volumes,
        clamp_scale=clamp_scale,
        has_negative_mass=negative,
    )
