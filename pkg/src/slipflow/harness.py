"""Experiment orchestration: canned plans, ensemble execution, sweeps,
CSV persistence and reproducibility manifests.

All variants of a plan share the plan seed, and noise draws are keyed by
(seed, realization, step, node), so ensembles across a viscosity or
delta sweep are driven by common random numbers; sweep-to-sweep trends
are estimated with far less Monte-Carlo noise than independent seeding
would give.  Outputs are plain CSV: one header line, '#'-prefixed
metadata lines, and a fixed column schema consumed by the plotting
front end.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .diagnostics import EnsembleStats, accumulate_ensemble, fit_scaling_exponent
from .errors import ConfigurationError, StabilityError
from .solver import (SimConfig, build_grid, make_operator, resolve_time_grid,
                     run_realization, validate_stability)

CSV_SCHEMA_VERSION = "slipflow-csv-1"
SERIES_COLUMNS = ("time", "ke_mean", "ke_sem", "diss_mean", "diss_sem",
                  "wall_ke_mean", "wall_ke_sem", "slipnorm_mean",
                  "cum_diss_mean")
SWEEP_COLUMNS = ("nu", "delta", "mode", "time_integrated_diss",
                 "final_wall_ke", "final_ke", "weak_diss")

DEFAULT_SEED = 20240
NU_SWEEP_DEFAULT = (0.5, 0.25, 0.1, 0.075, 0.05)
DELTA_SWEEP = (0.25, 0.5, 0.75, 0.9)


@dataclass
class ExperimentPlan:
    """A named list of SimConfig variants sharing geometry and seed."""

    name: str
    variants: list
    seed: int = DEFAULT_SEED
    description: str = ""

    def validate(self) -> "ExperimentPlan":
        labels = [v.label() for v in self.variants]
        if len(set(labels)) != len(labels):
            raise ConfigurationError(f"plan {self.name}: variant labels not unique")
        geoms = {v.geometry for v in self.variants}
        if len(geoms) != 1:
            raise ConfigurationError(f"plan {self.name}: mixed geometries {geoms}")
        return self

    def plan_hash(self) -> str:
        blob = json.dumps([_config_dict(v) for v in self.variants],
                          sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _config_dict(config: SimConfig) -> dict:
    d = {}
    for name in config.__dataclass_fields__:
        v = getattr(config, name)
        d[name] = v
    return d


def config_from_dict(d: dict) -> SimConfig:
    return SimConfig(**d)


def canned_plans(seed: int = DEFAULT_SEED) -> dict:
    """The four canned experiments.

    half-space stochastic and deterministic viscosity sweeps, the
    delta sweep at fixed nu = 0.1 (both drives), and the spherical
    viscosity sweep.  The sphere plan uses dt='auto' (90% of the
    stability limit): the half-space step 0.005 violates the explicit
    CFL limit near the origin/pole cells of the spherical mesh.
    """
    base = dict(delta=0.75, alpha=5e-4, dt=0.005, T=1.0, y_max=10.0,
                noise_mode="node_iid", realizations=250, seed=seed,
                sample_every=5)
    plans = {}
    plans["halfspace-stochastic"] = ExperimentPlan(
        name="halfspace-stochastic", seed=seed,
        description="viscosity sweep above the plate, noise-driven",
        variants=[SimConfig(nu=nu, geometry="halfspace", **base)
                  for nu in NU_SWEEP_DEFAULT])
    det = dict(base, noise_mode="off", realizations=1)
    plans["halfspace-deterministic"] = ExperimentPlan(
        name="halfspace-deterministic", seed=seed,
        description="same sweep with f = g and the noise off",
        variants=[SimConfig(nu=nu, geometry="halfspace",
                            deterministic_forcing=True, **det)
                  for nu in NU_SWEEP_DEFAULT])
    dv = []
    for d in DELTA_SWEEP:
        dv.append(SimConfig(nu=0.1, geometry="halfspace",
                            **dict(base, delta=d)))
        dv.append(SimConfig(nu=0.1, geometry="halfspace",
                            deterministic_forcing=True,
                            **dict(det, delta=d)))
    plans["halfspace-delta-sweep"] = ExperimentPlan(
        name="halfspace-delta-sweep", seed=seed,
        description="singularity-strength sweep at nu = 0.1, both drives",
        variants=dv)
    sphere = dict(base, dt="auto", sample_every="auto")
    plans["sphere-stochastic"] = ExperimentPlan(
        name="sphere-stochastic", seed=seed,
        description="viscosity sweep in the ball of radius 5, axisymmetric",
        variants=[SimConfig(nu=nu, geometry="sphere", mode="axisymmetric",
                            R=5.0, **sphere) for nu in NU_SWEEP_DEFAULT])
    for p in plans.values():
        p.validate()
    return plans


def _run_task(config_dict: dict, realization: int):
    config = config_from_dict(config_dict)
    return run_realization(config, realization_index=realization,
                           check_stability=False)


def run_ensemble(config: SimConfig, workers: int = 1) -> EnsembleStats:
    """Execute config.realizations trajectories and reduce them.

    Realizations are independent and may run in any schedule; the
    reduction is performed in realization order, so the result does not
    depend on the worker count.
    """
    n = config.realizations
    if workers <= 1 or n == 1:
        series = [run_realization(config, realization_index=r,
                                  check_stability=False)
                  for r in range(n)]
    else:
        cd = _config_dict(config)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            series = list(pool.map(_run_task, [cd] * n, range(n),
                                   chunksize=max(1, n // (4 * workers))))
    return accumulate_ensemble(series)


def _atomic_write(path: str, text: str):
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def format_series_csv(stats: EnsembleStats, config: SimConfig,
                      meta: dict | None = None) -> str:
    lines = [f"# schema: {CSV_SCHEMA_VERSION} series"]
    for k, v in (meta or {}).items():
        lines.append(f"# {k}: {v}")
    lines.append(",".join(SERIES_COLUMNS))
    m, s = stats.mean, stats.sem
    for i, t in enumerate(stats.times):
        row = (t, m["kinetic_energy"][i], s["kinetic_energy"][i],
               m["dissipation_rate"][i], s["dissipation_rate"][i],
               m["wall_energy"][i], s["wall_energy"][i],
               m["slip_norm"][i], m["cumulative_dissipation"][i])
        lines.append(",".join(f"{x:.17g}" for x in row))
    return "\n".join(lines) + "\n"


def format_sweep_csv(rows: list, meta: dict | None = None) -> str:
    keys = [(r["nu"], r["delta"], r["mode"]) for r in rows]
    if len(set(keys)) != len(keys):
        raise ConfigurationError("sweep rows must be unique per (nu, delta, mode)")
    lines = [f"# schema: {CSV_SCHEMA_VERSION} sweep"]
    for k, v in (meta or {}).items():
        lines.append(f"# {k}: {v}")
    lines.append(",".join(SWEEP_COLUMNS))
    for row in rows:
        lines.append(",".join(
            f"{row[c]:.17g}" if c != "mode" else str(row[c])
            for c in SWEEP_COLUMNS))
    return "\n".join(lines) + "\n"


def read_csv(path: str):
    """(column names, list of row dicts with floats where possible)."""
    header = None
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = line.split(",")
                continue
            parts = line.split(",")
            if len(parts) != len(header):
                raise ConfigurationError(f"malformed CSV row in {path}: {line!r}")
            row = {}
            for k, v in zip(header, parts):
                try:
                    row[k] = float(v)
                except ValueError:
                    row[k] = v
            rows.append(row)
    if header is None:
        raise ConfigurationError(f"empty CSV {path}")
    return header, rows


def csv_body(path: str) -> str:
    """CSV content without '#' metadata lines (for byte-level comparison)."""
    with open(path) as fh:
        return "".join(l for l in fh if not l.startswith("#"))


@dataclass
class RunManifest:
    plan_name: str
    plan_hash: str
    seed: int
    created: str
    versions: dict
    variants: list = field(default_factory=list)  # per-variant records

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "RunManifest":
        return RunManifest(**json.loads(text))


def sweep_row(config: SimConfig, stats: EnsembleStats) -> dict:
    return {
        "nu": config.nu,
        "delta": config.delta,
        "mode": "deterministic" if config.deterministic_forcing else "stochastic",
        "time_integrated_diss": stats.final("cumulative_dissipation"),
        "final_wall_ke": stats.final("wall_energy"),
        "final_ke": stats.final("kinetic_energy"),
        "weak_diss": config.nu * stats.final("kinetic_energy"),
    }


def run_plan(plan: ExperimentPlan, out_dir: str, workers: int = 1,
             force: bool = False, realizations: int | None = None,
             quiet: bool = False) -> RunManifest:
    """Run all variants, write per-variant series CSVs, the combined
    sweep CSV, and a manifest sufficient to re-run any variant
    bit-identically.  A stability violation aborts the variant (and the
    plan) unless force is set; files already written stay valid."""
    plan.validate()
    os.makedirs(out_dir, exist_ok=True)
    manifest = RunManifest(
        plan_name=plan.name, plan_hash=plan.plan_hash(), seed=plan.seed,
        created=time.strftime("%Y-%m-%dT%H:%M:%S"),
        versions={"numpy": np.__version__, "schema": CSV_SCHEMA_VERSION})
    rows = []
    t_start = time.time()
    for variant in plan.variants:
        config = variant if realizations is None else \
            replace(variant, realizations=realizations)
        grid = build_grid(config)
        operator = make_operator(grid, config.alpha, config.top_bc)
        report = validate_stability(config, grid, operator)
        if not report.passed:
            if not force:
                raise StabilityError(
                    f"variant {config.label()}: dt={report.dt:g} exceeds "
                    f"stability limit {report.dt_limit:g}", report)
            if not quiet:
                print(f"warning: {config.label()} exceeds the stability "
                      f"limit {report.dt_limit:g}; running anyway (--force)")
        dt, n_steps = resolve_time_grid(config, grid, operator)
        t0 = time.time()
        stats = run_ensemble(config, workers=workers)
        label = config.label()
        fname = f"series_{label}.csv"
        meta = {"plan": plan.name, "variant": label, "nu": config.nu,
                "delta": config.delta, "alpha": config.alpha, "dt": dt,
                "n_steps": n_steps, "realizations": config.realizations,
                "seed": config.seed, "created": manifest.created}
        _atomic_write(os.path.join(out_dir, fname),
                      format_series_csv(stats, config, meta))
        row = sweep_row(config, stats)
        rows.append(row)
        manifest.variants.append({
            "label": label, "seed": config.seed, "series_file": fname,
            "dt": dt, "n_steps": n_steps, "config": _config_dict(config),
            "wall_seconds": round(time.time() - t0, 3)})
        if not quiet:
            print(f"  {label}: {config.realizations} realizations, "
                  f"{n_steps} steps, {time.time() - t0:.1f}s")
    _atomic_write(os.path.join(out_dir, "sweep.csv"),
                  format_sweep_csv(rows, {"plan": plan.name,
                                          "created": manifest.created}))
    manifest.versions["wall_seconds"] = round(time.time() - t_start, 3)
    _atomic_write(os.path.join(out_dir, "manifest.json"), manifest.to_json())
    return manifest


def rerun_variant(manifest: RunManifest, label: str, out_dir: str,
                  workers: int = 1) -> str:
    """Re-run one variant from its manifest record; returns the CSV path."""
    rec = next((v for v in manifest.variants if v["label"] == label), None)
    if rec is None:
        raise ConfigurationError(f"no variant {label!r} in manifest")
    config = config_from_dict(rec["config"])
    stats = run_ensemble(config, workers=workers)
    dt, n_steps = rec["dt"], rec["n_steps"]
    meta = {"plan": manifest.plan_name, "variant": label, "nu": config.nu,
            "delta": config.delta, "alpha": config.alpha, "dt": dt,
            "n_steps": n_steps, "realizations": config.realizations,
            "seed": config.seed, "created": time.strftime("%Y-%m-%dT%H:%M:%S")}
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, rec["series_file"])
    _atomic_write(path, format_series_csv(stats, config, meta))
    return path


# ---------------------------------------------------------------------------
# configuration and plan files


_CONFIG_KEYS = {
    "geometry": str, "mode": str, "nu": float, "delta": float,
    "alpha": float, "dt": None, "T": float, "y_max": float, "R": float,
    "noise_mode": str, "deterministic_forcing": bool, "realizations": int,
    "seed": int, "sample_every": None, "amplitude": float,
    "regularization": str, "mesh_rule": str, "dy": float, "dr": float,
    "dtheta": float, "dphi": float, "top_bc": str,
}


def _parse_value(key: str, raw: str):
    kind = _CONFIG_KEYS[key]
    raw = raw.strip()
    if kind is bool:
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigurationError(f"bad boolean for {key}: {raw!r}")
    if kind is None:  # dt / sample_every: number or 'auto'
        if raw == "auto":
            return "auto"
        value = float(raw)
        return int(value) if key == "sample_every" else value
    if kind is int:
        return int(raw)
    if kind is float:
        return float(raw)
    return raw


def parse_config_text(text: str) -> SimConfig:
    values = {}
    for ln, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        for sep in ("=", ":"):
            if sep in line:
                key, raw = line.split(sep, 1)
                break
        else:
            raise ConfigurationError(f"line {ln}: expected 'key = value', got {line!r}")
        key = key.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigurationError(f"line {ln}: unknown key {key!r}")
        values[key] = _parse_value(key, raw)
    if "nu" not in values:
        raise ConfigurationError("config file must set nu")
    return SimConfig(**values)


def parse_config_file(path: str) -> SimConfig:
    with open(path) as fh:
        return parse_config_text(fh.read())


def load_plan_file(path: str) -> ExperimentPlan:
    """Plan file: JSON with name, seed, base config and variant overrides."""
    with open(path) as fh:
        doc = json.load(fh)
    base = doc.get("base", {})
    seed = int(doc.get("seed", DEFAULT_SEED))
    variants = []
    for over in doc.get("variants", [{}]):
        d = dict(base)
        d.update(over)
        d.setdefault("seed", seed)
        variants.append(SimConfig(**d))
    return ExperimentPlan(name=doc.get("name", os.path.basename(path)),
                          variants=variants, seed=seed,
                          description=doc.get("description", "")).validate()


# ---------------------------------------------------------------------------
# scaling report


@dataclass
class FitReport:
    """Log-log slopes of the sweep observables against nu."""

    groups: list = field(default_factory=list)

    def format(self) -> str:
        out = []
        for g in self.groups:
            out.append(f"group delta={g['delta']:g} mode={g['mode']} "
                       f"({g['n']} viscosities)")
            out.append(f"  dissipation slope  {g['diss_slope']:+.3f}  "
                       f"(r2={g['diss_r2']:.3f}; non-vanishing ~ 0)")
            out.append(f"  wall-energy slope  {g['wall_slope']:+.3f}  "
                       f"(r2={g['wall_r2']:.3f}; envelope -delta/2 = "
                       f"{-g['delta'] / 2:+.3f})")
            out.append(f"  weak dissipation   {g['weak_first']:.3g} -> "
                       f"{g['weak_last']:.3g} as nu decreases "
                       f"({'monotone' if g['weak_monotone'] else 'not monotone'})")
        return "\n".join(out)


def fit_report(sweep_csv: str) -> FitReport:
    """Slopes of time-integrated dissipation and final wall energy vs nu."""
    header, rows = read_csv(sweep_csv)
    missing = [c for c in SWEEP_COLUMNS if c not in header]
    if missing:
        raise ConfigurationError(f"sweep CSV missing columns {missing}")
    report = FitReport()
    keys = sorted({(r["delta"], r["mode"]) for r in rows})
    for delta, mode in keys:
        sub = sorted([r for r in rows if (r["delta"], r["mode"]) == (delta, mode)],
                     key=lambda r: -r["nu"])
        if len(sub) < 3:
            continue
        nus = [r["nu"] for r in sub]
        d_slope, _, d_r2 = fit_scaling_exponent(
            list(zip(nus, [r["time_integrated_diss"] for r in sub])))
        w_slope, _, w_r2 = fit_scaling_exponent(
            list(zip(nus, [r["final_wall_ke"] for r in sub])))
        weak = [r["weak_diss"] for r in sub]
        report.groups.append(dict(
            delta=delta, mode=mode, n=len(sub),
            diss_slope=d_slope, diss_r2=d_r2,
            wall_slope=w_slope, wall_r2=w_r2,
            weak_first=weak[0], weak_last=weak[-1],
            weak_monotone=bool(np.all(np.diff(weak) < 0))))
    if not report.groups:
        raise ConfigurationError("sweep CSV has no group with >= 3 viscosities")
    return report
