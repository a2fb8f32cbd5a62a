"""Derivative-free estimation of (v, D) and particle-number sweeps.

The optimizer is a plain Nelder-Mead simplex (reflection 1, expansion 2,
contraction 0.5, shrink 0.5). Stochastic simulators are made deterministic
objectives through common random numbers: one seed fixes the random-walk
increments (or the particle placement) for every parameter evaluation, so
the simplex never stalls on re-randomization noise. D stays positive by
searching over ln(D).
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .fitness import (
    DegenerateFitError,
    FitnessReport,
    aic,
    entropy_integral,
    fitness_report_iid,
    fitness_report_weighted,
    log_fitness_iid,
    weighted_mse,
)
from .model import AdeParams, Domain, NoiseSpec, ObservationSet, synthesize_observations
from .mtpt import MtptResult, PlacementSpec, simulate_mtpt
from .rwpt import ParticleEnsemble, bin_concentrations, default_grid, simulate_rwpt

__all__ = [
    "EstimationResult",
    "SweepConfig",
    "SweepRow",
    "SweepCurve",
    "nelder_mead",
    "estimate_parameters",
    "sweep_particle_numbers",
    "default_sweep_grid",
]


@dataclass
class EstimationResult:
    theta_hat: tuple
    criterion_value: float
    iterations: int
    converged: bool
    objective_kind: str
    n_evals: int = 0


def nelder_mead(
    objective,
    theta0,
    xtol: float = 1e-8,
    ftol: float = 1e-8,
    max_iter: int = 400,
) -> EstimationResult:
    """Minimize ``objective`` from ``theta0`` with a Nelder-Mead simplex.

    The initial simplex perturbs each coordinate by 5% (0.00025 absolute for
    zero coordinates). Terminates when both the simplex diameter and the
    value spread drop below the tolerances, or at the iteration cap (which
    returns the best point with ``converged=False``).
    """
    x0 = np.asarray(theta0, dtype=float)
    if x0.ndim != 1 or x0.size < 1:
        raise ValueError("theta0 must be a non-empty 1-D point")
    f0 = float(objective(x0))
    if not np.isfinite(f0):
        raise ValueError("objective is not finite at theta0")

    d = x0.size
    sim = [x0]
    for i in range(d):
        v = x0.copy()
        v[i] = v[i] * 1.05 if v[i] != 0 else 0.00025
        sim.append(v)
    sim = np.asarray(sim)
    fvals = np.array([f0] + [float(objective(v)) for v in sim[1:]])
    n_evals = d + 1

    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        order = np.argsort(fvals, kind="stable")
        sim, fvals = sim[order], fvals[order]
        diameter = np.max(np.abs(sim[1:] - sim[0]))
        spread = fvals[-1] - fvals[0]
        if diameter <= xtol and spread <= ftol:
            converged = True
            break

        centroid = sim[:-1].mean(axis=0)
        xr = centroid + (centroid - sim[-1])
        fr = float(objective(xr))
        n_evals += 1
        if fr < fvals[0]:
            xe = centroid + 2.0 * (centroid - sim[-1])
            fe = float(objective(xe))
            n_evals += 1
            sim[-1], fvals[-1] = (xe, fe) if fe < fr else (xr, fr)
        elif fr < fvals[-2]:
            sim[-1], fvals[-1] = xr, fr
        else:
            if fr < fvals[-1]:
                xc = centroid + 0.5 * (xr - centroid)
            else:
                xc = centroid - 0.5 * (centroid - sim[-1])
            fc = float(objective(xc))
            n_evals += 1
            if fc <= min(fr, fvals[-1]):
                sim[-1], fvals[-1] = xc, fc
            else:
                sim[1:] = sim[0] + 0.5 * (sim[1:] - sim[0])
                fvals[1:] = [float(objective(v)) for v in sim[1:]]
                n_evals += d

    best = int(np.argmin(fvals))
    return EstimationResult(
        theta_hat=tuple(sim[best]),
        criterion_value=float(fvals[best]),
        iterations=iterations,
        converged=converged,
        objective_kind="generic",
        n_evals=n_evals,
    )


def _rwpt_brownian_sums(n: int, T: float, dt: float, seed: int) -> np.ndarray:
    """Accumulated sqrt(dt)-scaled Normal increments, one sum per particle.

    Mirrors the stepping of ``simulate_rwpt`` so that positions for any
    (v, D) are x0 + v*T + sqrt(2*D) * sums -- the common-random-numbers view
    of the same walk.
    """
    rng = np.random.default_rng(seed)
    sums = np.zeros(n)
    remaining = T
    while remaining > 1e-15 * T:
        h = min(dt, remaining)
        sums += np.sqrt(h) * rng.standard_normal(n)
        remaining -= h
    return sums


def _model_values_mtpt(sim: MtptResult, locations: np.ndarray) -> np.ndarray:
    # Advection shifts the cloud off the data domain; outside it the modeled
    # concentration is zero, not the clamped end-particle value.
    return np.interp(locations, sim.positions, sim.concentrations, left=0.0, right=0.0)


def estimate_parameters(
    observations: ObservationSet,
    x0: float = 0.0,
    T: float = 1.0,
    domain: Domain = Domain(-5.0, 5.0),
    method: str = "mtpt",
    n: int = 3000,
    dt: float = 0.1,
    criterion: str = "aic-iid",
    seed: int = 0,
    theta0=(0.5, 0.5),
    placement_mode: str = "uniform",
    xtol: float = 1e-8,
    ftol: float = 1e-8,
    max_iter: int = 400,
) -> EstimationResult:
    """Estimate theta = (v, D) by simplex search against the observations.

    The objective is the AIC from iid residuals (``criterion="aic-iid"``) or
    the weighted mean square error (``criterion="weighted-mse"``), evaluated
    on a simulation with the candidate parameters. Identical seeds give
    bit-identical estimates.
    """
    if method not in ("rwpt", "mtpt"):
        raise ValueError(f"unknown method {method!r}")
    if criterion not in ("aic-iid", "weighted-mse"):
        raise ValueError(f"unknown criterion {criterion!r}")

    locations = observations.locations
    if method == "rwpt":
        brownian = _rwpt_brownian_sums(n, T, dt, seed)
        grid = default_grid(observations)
        masses = np.full(n, 1.0 / n)

        def model_values(v, D):
            positions = x0 + v * T + np.sqrt(2.0 * D) * brownian
            return bin_concentrations(ParticleEnsemble(positions, masses), grid)

    else:
        placement = PlacementSpec(placement_mode, seed)

        def model_values(v, D):
            sim = simulate_mtpt(
                AdeParams(v, D, x0, T), n, dt, placement, domain, release="split"
            )
            return _model_values_mtpt(sim, locations)

    def objective(u):
        v, D = u[0], np.exp(u[1])
        c_n = model_values(v, D)
        try:
            if criterion == "aic-iid":
                return aic(log_fitness_iid(c_n - observations.values), 2)
            return weighted_mse(observations, c_n, 1.0)
        except DegenerateFitError:
            return -np.inf

    u0 = np.array([theta0[0], np.log(theta0[1])])
    res = nelder_mead(objective, u0, xtol=xtol, ftol=ftol, max_iter=max_iter)
    v_hat, d_hat = res.theta_hat[0], float(np.exp(res.theta_hat[1]))
    return EstimationResult(
        theta_hat=(v_hat, d_hat),
        criterion_value=res.criterion_value,
        iterations=res.iterations,
        converged=res.converged,
        objective_kind=criterion,
        n_evals=res.n_evals,
    )


def default_sweep_grid(lo_exp: float = 2.0, hi_exp: float = 4.6, points: int = 12) -> tuple:
    """Log-spaced particle counts, deduplicated after rounding to ints."""
    ns = np.unique(np.round(np.logspace(lo_exp, hi_exp, points)).astype(int))
    return tuple(int(v) for v in ns)


@dataclass(frozen=True)
class SweepConfig:
    """Everything needed to trace fitness criteria against particle number."""

    params: AdeParams = AdeParams(v=0.0, D=1.0, x0=0.0, T=1.0)
    domain: Domain = Domain(-5.0, 5.0)
    k: int = 30
    spacing_mode: str = "uniform"
    alpha: float = 0.0
    method: str = "mtpt"
    criterion: str = "iid"
    comic_mode: str = "uniform"
    placement_mode: str = "uniform"
    release: str = "nearest"
    dt: float = 0.1
    grid: tuple = field(default_factory=default_sweep_grid)
    realizations: int = None
    master_seed: int = 0
    estimate_per_n: bool = False
    p: int = None
    select_by: str = "comic"

    def __post_init__(self):
        if self.method not in ("rwpt", "mtpt"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.criterion not in ("iid", "weighted"):
            raise ValueError(f"unknown criterion {self.criterion!r}")
        if self.comic_mode not in ("uniform", "integral"):
            raise ValueError(f"unknown comic_mode {self.comic_mode!r}")
        if len(self.grid) < 1 or list(self.grid) != sorted(set(self.grid)):
            raise ValueError("grid must be strictly ascending and non-empty")

    @property
    def data_stochastic(self) -> bool:
        return self.spacing_mode == "random" or self.alpha > 0

    @property
    def sim_stochastic(self) -> bool:
        return self.method == "rwpt" or self.placement_mode == "random"

    @property
    def stochastic(self) -> bool:
        return self.data_stochastic or self.sim_stochastic

    @property
    def effective_realizations(self) -> int:
        if self.realizations is not None:
            return self.realizations
        return 30 if self.stochastic else 1

    @property
    def effective_p(self) -> int:
        if self.p is not None:
            return self.p
        return 2 if self.estimate_per_n else 0


@dataclass
class SweepRow:
    n: int
    realization: int
    seed: int
    report: FitnessReport
    estimate: EstimationResult = None


@dataclass
class SweepCurve:
    ns: np.ndarray
    table: dict
    rows: list
    argmin_n: int
    argmin_index: int
    bracket: tuple
    realizations: int
    aggregation: str
    select_by: str


def row_seed(master_seed: int, n: int, realization: int) -> int:
    """Stable per-row seed: growing the grid or R never reshuffles old rows."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(n, realization))
    return int(ss.generate_state(1, np.uint64)[0])


def _child_seeds(seed: int, count: int = 3):
    state = np.random.SeedSequence(seed).generate_state(count, np.uint64)
    return [int(s) for s in state]


def compute_sweep_row(config: SweepConfig, n: int, realization: int, _sim_cache: dict = None) -> SweepRow:
    """Score one (n, realization) sweep point; reproducible from its seed alone."""
    seed = row_seed(config.master_seed, n, realization)
    data_seed, sim_seed, _ = _child_seeds(seed)
    params = config.params

    obs = synthesize_observations(
        params, config.domain, config.k, config.spacing_mode,
        NoiseSpec(config.alpha, data_seed),
    )

    estimate = None
    sim_params = params
    if config.estimate_per_n:
        crit = "aic-iid" if config.criterion == "iid" else "weighted-mse"
        estimate = estimate_parameters(
            obs, x0=params.x0, T=params.T, domain=config.domain,
            method=config.method, n=n, dt=config.dt, criterion=crit,
            seed=sim_seed, placement_mode=config.placement_mode,
        )
        sim_params = AdeParams(estimate.theta_hat[0], estimate.theta_hat[1], params.x0, params.T)

    entropy = None
    if config.method == "mtpt":
        cache_key = (n, sim_params) if not (config.sim_stochastic or config.estimate_per_n) else None
        sim = _sim_cache.get(cache_key) if (_sim_cache is not None and cache_key) else None
        if sim is None:
            sim = simulate_mtpt(
                sim_params, n, config.dt,
                PlacementSpec(config.placement_mode, sim_seed),
                config.domain, release=config.release,
            )
            if _sim_cache is not None and cache_key:
                _sim_cache[cache_key] = sim
        c_n = _model_values_mtpt(sim, obs.locations)
        if config.comic_mode == "integral":
            entropy = entropy_integral(sim.concentrations, sim.local_volumes)
        m_total = sim.m_total
    else:
        ensemble = simulate_rwpt(sim_params, n, config.dt, sim_seed)
        grid = default_grid(obs)
        c_n = bin_concentrations(ensemble, grid)
        if config.comic_mode == "integral":
            entropy = entropy_integral(c_n, grid.widths)
        m_total = ensemble.m_total

    p = config.effective_p
    if config.criterion == "iid":
        report = fitness_report_iid(c_n - obs.values, p, n, entropy_term=entropy)
    else:
        e = weighted_mse(obs, c_n, m_total)
        report = fitness_report_weighted(e, p, obs.k, n, entropy_term=entropy)
    return SweepRow(n=n, realization=realization, seed=seed, report=report, estimate=estimate)


_CRITERION_COLUMNS = ("aic", "aicc", "comic", "comicc", "entropy_term", "neg2lnL")


def _point_rows(config: SweepConfig, n: int) -> list:
    cache = {}
    return [
        compute_sweep_row(config, n, r, _sim_cache=cache)
        for r in range(config.effective_realizations)
    ]


def sweep_particle_numbers(config: SweepConfig, jobs: int = 1) -> SweepCurve:
    """Trace the fitness criteria across the particle-number grid.

    Deterministic configurations run a single realization; stochastic ones
    run R realizations per n (default 30) and report ensemble means. The
    headline output is the n minimizing the ``select_by`` column, with its
    bracketing grid neighbors since the minima are shallow.
    """
    ns = list(config.grid)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            per_point = list(pool.map(_point_rows, [config] * len(ns), ns))
    else:
        per_point = [_point_rows(config, n) for n in ns]

    rows = [row for point in per_point for row in point]
    table = {"n": np.asarray(ns, dtype=int)}
    for col in _CRITERION_COLUMNS:
        table[col] = np.array(
            [np.mean([getattr(r.report, col) for r in point]) for point in per_point]
        )

    values = table[config.select_by]
    idx = int(np.nanargmin(values))
    bracket = (
        int(ns[max(idx - 1, 0)]),
        int(ns[min(idx + 1, len(ns) - 1)]),
    )
    return SweepCurve(
        ns=np.asarray(ns, dtype=int),
        table=table,
        rows=rows,
        argmin_n=int(ns[idx]),
        argmin_index=idx,
        bracket=bracket,
        realizations=config.effective_realizations,
        aggregation="ensemble-mean" if config.effective_realizations > 1 else "single",
        select_by=config.select_by,
    )
