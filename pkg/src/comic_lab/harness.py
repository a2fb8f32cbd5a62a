"""Experiment runner: declarative JSON configs, canonical experiments E1-E6,
CSV/JSON persistence, and record verification.

Each run writes per-curve CSV files, an ``estimates.csv`` for estimation
groups, and a ``record.json`` tying everything to the configuration hash and
the per-row seeds. Every CSV row carries the seed that produced it, so
``verify_record`` can recompute any row in isolation and flag drift.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .estimation import (
    EstimationResult,
    SweepConfig,
    compute_sweep_row,
    default_sweep_grid,
    estimate_parameters,
    sweep_particle_numbers,
)
from .model import AdeParams, Domain, NoiseSpec, synthesize_observations

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "EstimateSpec",
    "RunRecord",
    "canonical_experiments",
    "run_experiment",
    "verify_record",
]

CONFIG_VERSION = 1
RECORD_VERSION = 1

CURVE_COLUMNS = (
    "n", "realization", "aic", "aicc", "comic", "comicc",
    "entropy_term", "criterion_kind", "seed",
)
ESTIMATE_COLUMNS = (
    "group", "method", "k", "spacing_mode", "n", "realization",
    "v_hat", "D_hat", "criterion_value", "converged", "iterations", "seed",
)

# Key space for estimation-group seeds, disjoint from sweep (n, r) keys.
_ESTIMATE_KEY_BASE = 1_000_000_007


class ConfigError(ValueError):
    """Raised for malformed or unknown configuration input."""


@dataclass(frozen=True)
class EstimateSpec:
    """One parameter-estimation group (one box in the estimate box plots)."""

    label: str
    method: str = "mtpt"
    k: int = 30
    spacing_mode: str = "uniform"
    alpha: float = 0.0
    n: int = 3000
    dt: float = 0.1
    criterion: str = "aic-iid"
    realizations: int = 1
    theta0: tuple = (0.5, 0.5)


_CONFIG_FIELDS = {
    "version", "experiment", "mode", "method", "params", "domain", "k",
    "spacing_mode", "alpha", "criterion", "comic_mode", "placement_mode",
    "release", "dt", "grid", "realizations", "master_seed", "estimate_per_n",
    "select_by", "estimation",
}
_PARAMS_FIELDS = {"v", "D", "x0", "T"}
_ESTIMATE_FIELDS = {
    "label", "method", "k", "spacing_mode", "alpha", "n", "dt",
    "criterion", "realizations", "theta0",
}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "custom"
    mode: str = "sweep"
    method: str = "mtpt"
    params: AdeParams = AdeParams(v=0.0, D=1.0, x0=0.0, T=1.0)
    domain: Domain = Domain(-5.0, 5.0)
    k: tuple = (30,)
    spacing_mode: str = "uniform"
    alpha: tuple = (0.0,)
    criterion: str = "iid"
    comic_mode: str = "uniform"
    placement_mode: str = "uniform"
    release: str = "nearest"
    dt: float = 0.1
    grid: tuple = field(default_factory=default_sweep_grid)
    realizations: int = None
    master_seed: int = 20231
    estimate_per_n: bool = False
    select_by: str = "comic"
    estimation: tuple = ()

    def to_dict(self) -> dict:
        return {
            "version": CONFIG_VERSION,
            "experiment": self.experiment,
            "mode": self.mode,
            "method": self.method,
            "params": {"v": self.params.v, "D": self.params.D,
                       "x0": self.params.x0, "T": self.params.T},
            "domain": [self.domain.lo, self.domain.hi],
            "k": list(self.k),
            "spacing_mode": self.spacing_mode,
            "alpha": list(self.alpha),
            "criterion": self.criterion,
            "comic_mode": self.comic_mode,
            "placement_mode": self.placement_mode,
            "release": self.release,
            "dt": self.dt,
            "grid": list(self.grid),
            "realizations": self.realizations,
            "master_seed": self.master_seed,
            "estimate_per_n": self.estimate_per_n,
            "select_by": self.select_by,
            "estimation": [vars(s) | {"theta0": list(s.theta0)} for s in self.estimation],
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def canonical_experiments() -> dict:
    """Canonical experiment catalog, keyed by id, as config override dicts.

    E1: fitness sweeps on uniformly spaced noiseless data, k in {10, 30, 200}.
    E2: parameter estimation on uniform data plus a sweep that re-estimates
        (v, D) at every particle number before scoring.
    E3: parameter estimation with randomly located data points.
    E4: randomly placed MTPT particles scored with the integral-form COMIC,
        ensemble of 30 placements.
    E5: weighted-MSE criterion on randomly located noiseless data.
    E6: weighted-MSE criterion on noisy data, alpha in {1/3, 1/9, 1/81}.
    """
    return {
        "E1": {
            "mode": "sweep",
            "k": [10, 30, 200],
            "params": {"v": 0.0, "D": 1.0, "x0": 0.0, "T": 1.0},
        },
        "E2": {
            "mode": "estimate",
            "params": {"v": 1.0, "D": 1.0, "x0": 0.0, "T": 1.0},
            "estimate_per_n": True,
            "grid": [int(v) for v in np.unique(np.round(np.logspace(2, 4, 9)))],
            "release": "split",
            "dt": 0.5,
            "estimation": [
                {"label": "mtpt-uniform-k30", "method": "mtpt", "k": 30, "n": 3000,
                 "dt": 0.1},
                {"label": "mtpt-uniform-k10", "method": "mtpt", "k": 10, "n": 3000,
                 "dt": 0.1},
                {"label": "rwpt-uniform-k30", "method": "rwpt", "k": 30,
                 "n": 20000, "dt": 0.1, "realizations": 20},
            ],
        },
        "E3": {
            "mode": "estimate",
            "params": {"v": 1.0, "D": 1.0, "x0": 0.0, "T": 1.0},
            "estimation": [
                {"label": "mtpt-random-k30", "method": "mtpt", "k": 30,
                 "spacing_mode": "random", "n": 3000, "realizations": 20},
                {"label": "mtpt-random-k10", "method": "mtpt", "k": 10,
                 "spacing_mode": "random", "n": 3000, "realizations": 20},
                {"label": "rwpt-random-k30", "method": "rwpt", "k": 30,
                 "spacing_mode": "random", "n": 5000, "realizations": 20},
                {"label": "rwpt-random-k10", "method": "rwpt", "k": 10,
                 "spacing_mode": "random", "n": 20000, "realizations": 20},
            ],
        },
        "E4": {
            "mode": "sweep",
            "params": {"v": 0.0, "D": 1.0, "x0": 0.0, "T": 1.0},
            "placement_mode": "random",
            "comic_mode": "integral",
            "dt": 0.25,
            "realizations": 30,
            "grid": [int(v) for v in np.unique(np.round(np.logspace(2, 4.5, 10)))],
        },
        "E5": {
            "mode": "sweep",
            "params": {"v": 0.0, "D": 1.0, "x0": 0.0, "T": 1.0},
            "criterion": "weighted",
            "spacing_mode": "random",
            "realizations": 30,
        },
        "E6": {
            "mode": "sweep",
            "params": {"v": 0.0, "D": 1.0, "x0": 0.0, "T": 1.0},
            "criterion": "weighted",
            "spacing_mode": "random",
            "alpha": [1 / 3, 1 / 9, 1 / 81],
            "realizations": 30,
            "grid": [int(v) for v in np.unique(np.round(np.logspace(1.7, 4.3, 11)))],
        },
    }


def _reject_unknown(given: dict, allowed: set, where: str):
    unknown = set(given) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")


def parse_config(data: dict) -> ExperimentConfig:
    """Validate a config dict (fail-closed) and resolve canonical defaults.

    Precedence: built-in defaults < canonical experiment overrides < user
    keys. Unknown keys anywhere are rejected.
    """
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    _reject_unknown(data, _CONFIG_FIELDS, "config")
    version = data.get("version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigError(f"unsupported config version {version!r}")

    experiment = data.get("experiment", "custom")
    catalog = canonical_experiments()
    if experiment != "custom":
        if experiment not in catalog:
            raise ConfigError(f"unknown experiment id {experiment!r}")
        merged = dict(catalog[experiment])
        merged.update({k: v for k, v in data.items() if k not in ("version", "experiment")})
    else:
        merged = {k: v for k, v in data.items() if k not in ("version", "experiment")}

    params_raw = merged.pop("params", {"v": 0.0, "D": 1.0, "x0": 0.0, "T": 1.0})
    _reject_unknown(params_raw, _PARAMS_FIELDS, "params")
    try:
        params = AdeParams(
            v=float(params_raw.get("v", 0.0)), D=float(params_raw.get("D", 1.0)),
            x0=float(params_raw.get("x0", 0.0)), T=float(params_raw.get("T", 1.0)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid params: {exc}") from exc

    domain_raw = merged.pop("domain", [-5.0, 5.0])
    if not (isinstance(domain_raw, (list, tuple)) and len(domain_raw) == 2):
        raise ConfigError("domain must be a [lo, hi] pair")
    try:
        domain = Domain(float(domain_raw[0]), float(domain_raw[1]))
    except ValueError as exc:
        raise ConfigError(f"invalid domain: {exc}") from exc

    k_raw = merged.pop("k", [30])
    ks = tuple(int(v) for v in (k_raw if isinstance(k_raw, (list, tuple)) else [k_raw]))
    if any(v < 1 for v in ks):
        raise ConfigError("k values must be >= 1")
    alpha_raw = merged.pop("alpha", [0.0])
    alphas = tuple(
        float(v) for v in (alpha_raw if isinstance(alpha_raw, (list, tuple)) else [alpha_raw])
    )
    if any(a < 0 for a in alphas):
        raise ConfigError("alpha values must be >= 0")

    est_raw = merged.pop("estimation", [])
    specs = []
    for i, item in enumerate(est_raw):
        _reject_unknown(item, _ESTIMATE_FIELDS, f"estimation[{i}]")
        if "label" not in item:
            raise ConfigError(f"estimation[{i}] needs a label")
        item = dict(item)
        item["theta0"] = tuple(item.get("theta0", (0.5, 0.5)))
        specs.append(EstimateSpec(**item))

    grid = merged.pop("grid", None)
    kwargs = dict(
        experiment=experiment,
        mode=merged.pop("mode", "sweep"),
        method=merged.pop("method", "mtpt"),
        params=params,
        domain=domain,
        k=ks,
        alpha=alphas,
        estimation=tuple(specs),
    )
    for name in ("spacing_mode", "criterion", "comic_mode", "placement_mode",
                 "release", "select_by"):
        if name in merged:
            kwargs[name] = str(merged.pop(name))
    for name, cast in (("dt", float), ("master_seed", int),
                       ("estimate_per_n", bool)):
        if name in merged:
            kwargs[name] = cast(merged.pop(name))
    if "realizations" in merged:
        r = merged.pop("realizations")
        kwargs["realizations"] = None if r is None else int(r)
    if grid is not None:
        kwargs["grid"] = tuple(int(v) for v in grid)

    config = ExperimentConfig(**kwargs)
    if config.mode not in ("sweep", "estimate"):
        raise ConfigError(f"unknown mode {config.mode!r}")
    if config.mode == "estimate" and not config.estimation:
        raise ConfigError("estimate mode requires a non-empty estimation list")
    # Exercise the sweep validators so bad values fail before any work runs.
    if config.mode == "sweep":
        try:
            for label, sweep in _sweep_tasks(config):
                _ = sweep.effective_realizations
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    return config


def load_config(path, master_seed_override: int = None) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    config = parse_config(data)
    if master_seed_override is not None:
        config = ExperimentConfig(**{**_as_kwargs(config), "master_seed": master_seed_override})
    return config


def _as_kwargs(config: ExperimentConfig) -> dict:
    return {f: getattr(config, f) for f in config.__dataclass_fields__}


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _sweep_label(config: ExperimentConfig, k: int, alpha: float) -> str:
    parts = []
    if len(config.k) > 1:
        parts.append(f"k{k}")
    if len(config.alpha) > 1:
        parts.append(f"alpha{alpha:.6g}".replace(".", "p"))
    return "_".join(parts) if parts else "curve"


def _sweep_tasks(config: ExperimentConfig):
    for k in config.k:
        for alpha in config.alpha:
            yield _sweep_label(config, k, alpha), SweepConfig(
                params=config.params,
                domain=config.domain,
                k=k,
                spacing_mode=config.spacing_mode,
                alpha=alpha,
                method=config.method,
                criterion=config.criterion,
                comic_mode=config.comic_mode,
                placement_mode=config.placement_mode,
                release=config.release,
                dt=config.dt,
                grid=config.grid,
                realizations=config.realizations,
                master_seed=config.master_seed,
                estimate_per_n=config.estimate_per_n,
                select_by=config.select_by,
            )


def estimate_row_seed(master_seed: int, group_index: int, realization: int) -> int:
    ss = np.random.SeedSequence(
        entropy=master_seed, spawn_key=(_ESTIMATE_KEY_BASE + group_index, realization)
    )
    return int(ss.generate_state(1, np.uint64)[0])


def compute_estimate_row(
    config: ExperimentConfig, spec: EstimateSpec, group_index: int, realization: int
) -> dict:
    """One estimation realization, reproducible from its derived seed."""
    seed = estimate_row_seed(config.master_seed, group_index, realization)
    state = np.random.SeedSequence(seed).generate_state(2, np.uint64)
    data_seed, sim_seed = int(state[0]), int(state[1])
    obs = synthesize_observations(
        config.params, config.domain, spec.k, spec.spacing_mode,
        NoiseSpec(spec.alpha, data_seed),
    )
    result = estimate_parameters(
        obs, x0=config.params.x0, T=config.params.T, domain=config.domain,
        method=spec.method, n=spec.n, dt=spec.dt, criterion=spec.criterion,
        seed=sim_seed, theta0=spec.theta0, placement_mode=config.placement_mode,
    )
    return {
        "group": spec.label,
        "method": spec.method,
        "k": spec.k,
        "spacing_mode": spec.spacing_mode,
        "n": spec.n,
        "realization": realization,
        "v_hat": result.theta_hat[0],
        "D_hat": result.theta_hat[1],
        "criterion_value": result.criterion_value,
        "converged": result.converged,
        "iterations": result.iterations,
        "seed": seed,
    }


def _write_curve_csv(path: Path, rows):
    lines = [",".join(CURVE_COLUMNS)]
    for row in rows:
        rep = row.report
        lines.append(",".join([
            str(row.n), str(row.realization),
            _fmt(rep.aic), _fmt(rep.aicc), _fmt(rep.comic), _fmt(rep.comicc),
            _fmt(rep.entropy_term), rep.criterion_kind, str(row.seed),
        ]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def _write_estimates_csv(path: Path, rows):
    lines = [",".join(ESTIMATE_COLUMNS)]
    for row in rows:
        lines.append(",".join([
            row["group"], row["method"], str(row["k"]), row["spacing_mode"],
            str(row["n"]), str(row["realization"]),
            _fmt(row["v_hat"]), _fmt(row["D_hat"]), _fmt(row["criterion_value"]),
            str(row["converged"]).lower(), str(row["iterations"]), str(row["seed"]),
        ]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def _quartiles(values) -> list:
    return [float(q) for q in np.percentile(np.asarray(values, dtype=float), [25, 50, 75])]


@dataclass
class RunRecord:
    path: Path
    data: dict

    @property
    def ok(self) -> bool:
        return self.data.get("status") == "ok"


def run_experiment(config: ExperimentConfig, out_dir, jobs: int = 1) -> RunRecord:
    """Execute the configured experiment and persist CSV + JSON outputs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = datetime.now(timezone.utc)
    t0 = time.monotonic()

    record = {
        "record_version": RECORD_VERSION,
        "software_version": __version__,
        "config": config.to_dict(),
        "config_hash": config.config_hash(),
        "started": started.isoformat(),
        "status": "ok",
        "sweeps": {},
        "estimation": {},
        "outputs": [],
    }
    summary = [f"experiment {config.experiment} ({config.mode})",
               f"config hash {config.config_hash()}"]

    if config.mode == "sweep":
        for label, sweep in _sweep_tasks(config):
            curve = sweep_particle_numbers(sweep, jobs=jobs)
            csv_name = f"curve_{label}.csv"
            _write_curve_csv(out / csv_name, curve.rows)
            record["sweeps"][label] = {
                "csv": csv_name,
                "k": sweep.k,
                "alpha": sweep.alpha,
                "realizations": curve.realizations,
                "aggregation": curve.aggregation,
                "select_by": curve.select_by,
                "argmin": {
                    "n": curve.argmin_n,
                    "index": curve.argmin_index,
                    "bracket": list(curve.bracket),
                },
                "means": {key: [float(v) for v in vals]
                          for key, vals in curve.table.items() if key != "n"},
                "ns": [int(v) for v in curve.ns],
            }
            record["outputs"].append(csv_name)
            summary.append(
                f"  {label}: argmin_{curve.select_by} n={curve.argmin_n} "
                f"bracket={curve.bracket} (R={curve.realizations})"
            )
    else:
        est_rows = []
        for gi, spec in enumerate(config.estimation):
            group_rows = [
                compute_estimate_row(config, spec, gi, r)
                for r in range(spec.realizations)
            ]
            est_rows.extend(group_rows)
            record["estimation"][spec.label] = {
                "spec": vars(spec) | {"theta0": list(spec.theta0)},
                "group_index": gi,
                "realizations": group_rows,
                "quartiles": {
                    "v_hat": _quartiles([r["v_hat"] for r in group_rows]),
                    "D_hat": _quartiles([r["D_hat"] for r in group_rows]),
                },
            }
            med_v = record["estimation"][spec.label]["quartiles"]["v_hat"][1]
            med_d = record["estimation"][spec.label]["quartiles"]["D_hat"][1]
            summary.append(
                f"  {spec.label}: median v_hat={med_v:.6g} D_hat={med_d:.6g} "
                f"(R={spec.realizations})"
            )
        _write_estimates_csv(out / "estimates.csv", est_rows)
        record["outputs"].append("estimates.csv")
        if config.estimate_per_n:
            label = "estimated"
            sweep = next(s for _, s in _sweep_tasks(config))
            curve = sweep_particle_numbers(sweep, jobs=jobs)
            csv_name = f"curve_{label}.csv"
            _write_curve_csv(out / csv_name, curve.rows)
            record["sweeps"][label] = {
                "csv": csv_name,
                "k": sweep.k,
                "alpha": sweep.alpha,
                "realizations": curve.realizations,
                "aggregation": curve.aggregation,
                "select_by": curve.select_by,
                "argmin": {
                    "n": curve.argmin_n,
                    "index": curve.argmin_index,
                    "bracket": list(curve.bracket),
                },
                "means": {key: [float(v) for v in vals]
                          for key, vals in curve.table.items() if key != "n"},
                "ns": [int(v) for v in curve.ns],
            }
            record["outputs"].append(csv_name)
            summary.append(
                f"  {label}: argmin_{curve.select_by} n={curve.argmin_n} "
                f"bracket={curve.bracket}"
            )

    finished = datetime.now(timezone.utc)
    record["finished"] = finished.isoformat()
    record["wall_seconds"] = time.monotonic() - t0
    record["outputs"].extend(["summary.txt"])

    (out / "summary.txt").write_text("\n".join(summary) + "\n", encoding="utf-8")
    record_path = out / "record.json"
    record_path.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n",
                           encoding="utf-8")
    return RunRecord(path=record_path, data=record)


def _stratified_sample(rows_by_n: dict, fraction: float = 0.1):
    """At least one row per n, roughly ``fraction`` of all rows overall."""
    all_rows = [row for rows in rows_by_n.values() for row in rows]
    stride = max(1, round(1 / fraction))
    picked = {id(row) for row in all_rows[::stride]}
    for rows in rows_by_n.values():
        picked.add(id(rows[0]))
    return [row for row in all_rows if id(row) in picked]


def verify_record(record_path, fraction: float = 0.1) -> dict:
    """Recompute a stratified subsample of rows and compare to the record.

    Returns a report dict with ``passed`` plus a list of failures, each
    naming the file, n (or group), and column that drifted. Deterministic
    paths must match to 1e-12 relative.
    """
    record_path = Path(record_path)
    failures = []
    if not record_path.exists():
        return {"passed": False, "failures": [f"missing record {record_path}"], "checked": 0}
    record = json.loads(record_path.read_text())
    config = parse_config(record["config"])
    if config.config_hash() != record["config_hash"]:
        failures.append("config hash mismatch between echo and record")
    base = record_path.parent

    missing = [name for name in record["outputs"] if not (base / name).exists()]
    for name in missing:
        failures.append(f"missing output file {name}")

    checked = 0
    rel_tol = 1e-12
    float_cols = ("aic", "aicc", "comic", "comicc", "entropy_term")

    sweeps = list(record.get("sweeps", {}).items())
    tasks = dict(_sweep_tasks(config))
    for label, info in sweeps:
        csv_path = base / info["csv"]
        if not csv_path.exists():
            continue
        header, *lines = csv_path.read_text(encoding="utf-8").splitlines()
        if header != ",".join(CURVE_COLUMNS):
            failures.append(f"{info['csv']}: unexpected header")
            continue
        if label in tasks:
            sweep = tasks[label]
        else:
            sweep = next(s for _, s in _sweep_tasks(config))
        rows_by_n = {}
        for line in lines:
            parts = line.split(",")
            rows_by_n.setdefault(int(parts[0]), []).append(parts)
        cache = {}
        for parts in _stratified_sample(rows_by_n, fraction):
            n, r = int(parts[0]), int(parts[1])
            fresh = compute_sweep_row(sweep, n, r, _sim_cache=cache)
            if fresh.seed != int(parts[8]):
                failures.append(f"{info['csv']}: n={n} r={r} column=seed")
                continue
            stored = dict(zip(CURVE_COLUMNS, parts))
            for col in float_cols:
                want = getattr(fresh.report, col)
                got = float(stored[col])
                if not np.isclose(got, want, rtol=rel_tol, atol=0.0, equal_nan=True):
                    failures.append(
                        f"{info['csv']}: n={n} r={r} column={col} "
                        f"stored={got!r} recomputed={want!r}"
                    )
            checked += 1

    if record.get("estimation"):
        csv_path = base / "estimates.csv"
        if csv_path.exists():
            header, *lines = csv_path.read_text(encoding="utf-8").splitlines()
            if header != ",".join(ESTIMATE_COLUMNS):
                failures.append("estimates.csv: unexpected header")
            else:
                specs = {s.label: (gi, s) for gi, s in enumerate(config.estimation)}
                rows_by_group = {}
                for line in lines:
                    parts = line.split(",")
                    rows_by_group.setdefault(parts[0], []).append(parts)
                for parts in _stratified_sample(rows_by_group, fraction):
                    group, r = parts[0], int(parts[5])
                    if group not in specs:
                        failures.append(f"estimates.csv: unknown group {group}")
                        continue
                    gi, spec = specs[group]
                    fresh = compute_estimate_row(config, spec, gi, r)
                    for col in ("v_hat", "D_hat", "criterion_value"):
                        got = float(parts[ESTIMATE_COLUMNS.index(col)])
                        if not np.isclose(got, fresh[col], rtol=rel_tol, atol=0.0):
                            failures.append(
                                f"estimates.csv: group={group} r={r} column={col} "
                                f"stored={got!r} recomputed={fresh[col]!r}"
                            )
                    checked += 1

    return {"passed": not failures, "failures": failures, "checked": checked}
