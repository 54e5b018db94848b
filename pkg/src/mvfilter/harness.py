"""Experiment orchestration: configs, pipelines, result records, reports.

A single JSON-serializable config names a scenario (simulate, filter,
diagnose, sweep) plus the model preset and numerical knobs; running it
produces ResultRecord objects and, when an output directory is set, CSV and
JSON artifacts.  Payload floats are serialized through a fixed shortest
round-trip format so identical configs reproduce identical bytes no matter
the thread count; wall-clock fields stay out of the CSV payloads for the
same reason.
"""

from __future__ import annotations

import json
import subprocess
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .diagnostics import kushner_stratonovich_residual, mass_identity_residual, zakai_residual
from .filtering import FilterConfig, initial_filter_state, run_filter
from .functionals import state_battery
from .presets import ModelPreset, coefficient_preset, preset_names
from .sde import SimConfig, export_truth_csv, simulate_law_flow, simulate_truth
from .testfunctions import constant, windowed_coordinate
from .util import config_hash, derive_seed, format_float, parallel_map

__all__ = [
    "ExperimentConfig",
    "ResultRecord",
    "run_experiment",
    "records_pass",
    "sweep_monotone",
    "render_report",
    "write_records",
    "load_records",
    "write_csv",
    "package_version",
]

_MAX_PARTICLE_STEPS = 500_000_000

_DEFAULT_CAPS = {"mass": 0.15, "zakai": 0.15, "ks": 0.15}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a pipeline needs, round-trippable through JSON."""

    scenario: str = "filter"
    preset: str = "linear-gaussian"
    preset_overrides: dict = field(default_factory=dict)
    horizon: float = 1.0
    dt: float = 5e-3
    n_law: int = 256
    n_particles: int = 1000
    seed: int = 20260814
    resample: str = "none"
    ess_threshold: float = 0.5
    snapshot_stride: int = 0
    ensemble_size: int = 64
    epsilon: float | None = None
    n_seeds: int = 20
    sweep: dict = field(default_factory=dict)
    caps: dict = field(default_factory=dict)
    threads: int = 1
    out_dir: str | None = None

    def __post_init__(self):
        if self.scenario not in _PIPELINES:
            raise ValueError(f"unknown scenario {self.scenario!r}; have {sorted(_PIPELINES)}")
        if self.preset not in preset_names():
            raise ValueError(f"unknown preset {self.preset!r}; have {preset_names()}")
        bad_axes = set(self.sweep) - {"dt", "n_particles", "n_law", "ensemble_size", "epsilon"}
        if bad_axes:
            raise ValueError(f"unknown sweep axes {sorted(bad_axes)}")
        for axis, grid in self.sweep.items():
            if not grid:
                raise ValueError(f"sweep axis {axis!r} has an empty grid")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config fields {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json_file(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    @property
    def hash(self) -> str:
        """Semantic hash: execution details (threads, out_dir) excluded."""
        d = self.to_dict()
        d.pop("threads")
        d.pop("out_dir")
        return config_hash(d)

    def model(self) -> ModelPreset:
        return coefficient_preset(self.preset, **self.preset_overrides)

    def sim(self, seed=None) -> SimConfig:
        return SimConfig(
            horizon=self.horizon,
            dt=self.dt,
            n_law=self.n_law,
            seed=self.seed if seed is None else seed,
        )


@dataclass(frozen=True)
class ResultRecord:
    record_id: str
    diagnostic: str
    config_hash: str
    version: str
    payload: dict
    wall_clock_s: float

    def to_dict(self) -> dict:
        d = asdict(self)
        d["payload"] = _round_trip_floats(self.payload)
        return d


def _round_trip_floats(obj):
    if isinstance(obj, dict):
        return {k: _round_trip_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_trip_floats(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return float(format_float(float(obj)))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_round_trip_floats(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def package_version() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--tags", "--always", "--dirty"],
            capture_output=True, text=True, timeout=10, cwd=Path(__file__).parent,
        )
        if out.returncode == 0 and out.stdout.strip():
            return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    try:
        from importlib.metadata import version

        return version("mvfilter")
    except Exception:
        return "0.1.0"


def write_csv(path, header, rows):
    def cell(v):
        if isinstance(v, (bool, np.bool_)):
            return str(bool(v)).lower()
        if isinstance(v, (float, np.floating)):
            return format_float(float(v))
        return str(v)

    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(cell(v) for v in row) + "\n")


def write_records(path, records):
    with open(path, "w") as fh:
        json.dump([r.to_dict() for r in records], fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_records(path) -> list[ResultRecord]:
    with open(path) as fh:
        raw = json.load(fh)
    return [ResultRecord(**d) for d in raw]


def _guard(cfg: ExperimentConfig, n_particles=None):
    steps = round(cfg.horizon / cfg.dt)
    n = cfg.n_particles if n_particles is None else n_particles
    if n * steps > _MAX_PARTICLE_STEPS:
        raise ValueError(f"resource guard: {n} particles x {steps} steps exceeds the cap")


def _default_record(dim: int):
    return (
        (windowed_coordinate(dim, 0, 3.0, 6.0), constant(dim)),
        ("wx", "one"),
    )


def _pipeline_simulate(cfg: ExperimentConfig) -> list[ResultRecord]:
    start = time.perf_counter()
    model = cfg.model()
    sim = cfg.sim()
    law = simulate_law_flow(model.coefficients, model.initial_law, sim)
    truth = simulate_truth(model.coefficients, law, model.initial_law, sim)
    if cfg.out_dir:
        export_truth_csv(Path(cfg.out_dir) / "truth.csv", truth)
    final_law = law.at(len(law.measures) - 1)
    payload = {
        "terminal_signal": truth.X[-1].tolist(),
        "terminal_observation": truth.Y[-1].tolist(),
        "terminal_log_gamma": float(truth.log_gamma[-1]),
        "law_mean": final_law.mean().tolist(),
        "law_second_moment": float(final_law.second_moment_norm()),
    }
    return [ResultRecord(
        record_id=f"simulate/{cfg.preset}/{cfg.seed}",
        diagnostic="simulate",
        config_hash=cfg.hash,
        version=package_version(),
        payload=_round_trip_floats(payload),
        wall_clock_s=time.perf_counter() - start,
    )]


def _run_one_filter(cfg: ExperimentConfig, seed: int, snapshot_stride=None):
    model = cfg.model()
    sim = cfg.sim(seed)
    _guard(cfg)
    law = simulate_law_flow(model.coefficients, model.initial_law, sim)
    truth = simulate_truth(model.coefficients, law, model.initial_law, sim)
    record, ids = _default_record(model.coefficients.n)
    fcfg = FilterConfig(
        n_particles=cfg.n_particles,
        resample=cfg.resample,
        ess_threshold=cfg.ess_threshold,
        record=record,
        record_ids=ids,
        snapshot_stride=cfg.snapshot_stride if snapshot_stride is None else snapshot_stride,
    )
    init = initial_filter_state(model.initial_law, cfg.n_particles, seed)
    trace = run_filter(model.coefficients, law, truth.dVtilde, fcfg, init, seed)
    return model, law, truth, trace


def _pipeline_filter(cfg: ExperimentConfig) -> list[ResultRecord]:
    start = time.perf_counter()
    model, law, truth, trace = _run_one_filter(cfg, cfg.seed)
    if cfg.out_dir:
        rows = []
        for k, t in enumerate(trace.times):
            row = [t, trace.masses[k]]
            for ident in trace.tracked:
                row.append(trace.tracked[ident]["value"][k])
                row.append(trace.tracked[ident]["value"][k] / trace.masses[k])
            rows.append(row)
        header = ["t", "mass"]
        for ident in trace.tracked:
            header += [f"raw_{ident}", f"normalized_{ident}"]
        write_csv(Path(cfg.out_dir) / "filter_trace.csv", header, rows)
    payload = {
        "terminal_mass": float(trace.masses[-1]),
        "terminal_normalized": {
            ident: float(trace.tracked[ident]["value"][-1] / trace.masses[-1])
            for ident in trace.tracked
        },
        "resampled_steps": len(trace.resampled),
    }
    return [ResultRecord(
        record_id=f"filter/{cfg.preset}/{cfg.seed}",
        diagnostic="filter",
        config_hash=cfg.hash,
        version=package_version(),
        payload=_round_trip_floats(payload),
        wall_clock_s=time.perf_counter() - start,
    )]


def _pipeline_diagnose(cfg: ExperimentConfig) -> list[ResultRecord]:
    start = time.perf_counter()
    if cfg.resample != "none":
        raise ValueError("identity diagnostics need resample='none'")
    model, law, truth, trace = _run_one_filter(cfg, cfg.seed, snapshot_stride=1)
    caps = {**_DEFAULT_CAPS, **cfg.caps}
    mass = mass_identity_residual(trace, truth.dVtilde)
    zak = zakai_residual(trace, truth.dVtilde, "wx")
    fun = state_battery(model.coefficients.n)[0]
    ks = kushner_stratonovich_residual(model.coefficients, law, trace, fun, truth.dVtilde)
    version = package_version()
    records = []
    for name, value in (("mass", mass["sup"]), ("zakai", zak["final"]), ("ks", ks["final"])):
        payload = {"value": float(value), "cap": caps[name], "passed": bool(value <= caps[name]),
                   "dt": cfg.dt, "n_particles": cfg.n_particles, "seed": cfg.seed}
        records.append(ResultRecord(
            record_id=f"diagnose/{name}/{cfg.preset}/{cfg.seed}",
            diagnostic=name,
            config_hash=cfg.hash,
            version=version,
            payload=_round_trip_floats(payload),
            wall_clock_s=time.perf_counter() - start,
        ))
    if cfg.out_dir:
        write_csv(
            Path(cfg.out_dir) / "diagnose.csv",
            ["diagnostic", "value", "cap", "passed"],
            [(r.diagnostic, r.payload["value"], r.payload["cap"], r.payload["passed"]) for r in records],
        )
    return records


def _sweep_cells(cfg: ExperimentConfig):
    axes = sorted(cfg.sweep)
    grids = [cfg.sweep[a] for a in axes]
    cells = [{}]
    for axis, grid in zip(axes, grids):
        cells = [{**cell, axis: v} for cell in cells for v in grid]
    return axes, cells


def _sweep_cell_median(args):
    cfg, cell = args
    sub = replace(
        cfg,
        dt=cell.get("dt", cfg.dt),
        n_particles=cell.get("n_particles", cfg.n_particles),
        n_law=cell.get("n_law", cfg.n_law),
        scenario="filter",
        out_dir=None,
    )
    _guard(sub)
    finals = []
    for s in range(cfg.n_seeds):
        seed = derive_seed(cfg.seed, "sweep", s)
        _, _, truth, trace = _run_one_filter(sub, seed)
        finals.append(zakai_residual(trace, truth.dVtilde, "wx")["final"])
    arr = np.array(finals)
    return {**cell, "median": float(np.median(arr)), "rms": float(np.sqrt(np.mean(arr ** 2)))}


def sweep_monotone(axes, sweep_spec, results) -> dict:
    """Per-axis flag: do cell medians drop strictly from coarse to fine?

    Coarse means large ``dt``/``epsilon`` and small counts; cells sharing an
    axis value are pooled by their median before comparing.
    """
    monotone = {}
    for axis in axes:
        grid = sorted(set(sweep_spec[axis]))
        if len(grid) < 2:
            continue
        ordered = list(reversed(grid)) if axis in ("dt", "epsilon") else grid
        meds = []
        for v in ordered:
            matches = [r["median"] for r in results if r.get(axis) == v]
            meds.append(float(np.median(matches)))
        monotone[axis] = bool(all(meds[i] > meds[i + 1] for i in range(len(meds) - 1)))
    return monotone


def _pipeline_sweep(cfg: ExperimentConfig) -> list[ResultRecord]:
    start = time.perf_counter()
    if not cfg.sweep:
        raise ValueError("sweep scenario needs at least one sweep axis")
    axes, cells = _sweep_cells(cfg)
    results = parallel_map(_sweep_cell_median, [(cfg, cell) for cell in cells], threads=cfg.threads)

    monotone = sweep_monotone(axes, cfg.sweep, results)

    version = package_version()
    records = []
    for r in results:
        cell_id = ",".join(f"{a}={r[a]}" for a in axes)
        records.append(ResultRecord(
            record_id=f"sweep/{cfg.preset}/{cell_id}",
            diagnostic="zakai-sweep-cell",
            config_hash=cfg.hash,
            version=version,
            payload=_round_trip_floats({**r, "n_seeds": cfg.n_seeds}),
            wall_clock_s=time.perf_counter() - start,
        ))
    records.append(ResultRecord(
        record_id=f"sweep/{cfg.preset}/monotone",
        diagnostic="zakai-sweep-monotone",
        config_hash=cfg.hash,
        version=version,
        payload=_round_trip_floats({"monotone": monotone, "passed": all(monotone.values()) if monotone else True}),
        wall_clock_s=time.perf_counter() - start,
    ))
    if cfg.out_dir:
        header = axes + ["median", "rms", "n_seeds"]
        rows = [[r[a] for a in axes] + [r["median"], r["rms"], cfg.n_seeds] for r in results]
        write_csv(Path(cfg.out_dir) / "sweep.csv", header, rows)
    return records


_PIPELINES = {
    "simulate": _pipeline_simulate,
    "filter": _pipeline_filter,
    "diagnose": _pipeline_diagnose,
    "sweep": _pipeline_sweep,
}


def run_experiment(cfg: ExperimentConfig) -> list[ResultRecord]:
    if cfg.out_dir:
        Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)
    records = _PIPELINES[cfg.scenario](cfg)
    if cfg.out_dir:
        write_records(Path(cfg.out_dir) / "records.json", records)
    return records


def records_pass(records) -> bool:
    """A record set passes when no payload carries passed=False."""
    return all(r.payload.get("passed", True) for r in records)


def render_report(records) -> str:
    """Plain-text summary table of a record list."""
    if not records:
        return "no records\n"
    lines = []
    width = max(len(r.record_id) for r in records)
    lines.append(f"{'record':<{width}}  {'diagnostic':<22}  {'status':<7}  summary")
    lines.append("-" * (width + 55))
    for r in records:
        status = "pass" if r.payload.get("passed", True) else "FAIL"
        keys = [k for k in ("value", "median", "cap", "terminal_mass", "c_hat", "monotone") if k in r.payload]
        summary = " ".join(f"{k}={r.payload[k]:.6g}" if isinstance(r.payload[k], float)
                           else f"{k}={r.payload[k]}" for k in keys)
        lines.append(f"{r.record_id:<{width}}  {r.diagnostic:<22}  {status:<7}  {summary}")
    lines.append(f"{len(records)} records; overall: {'pass' if records_pass(records) else 'FAIL'}")
    return "\n".join(lines) + "\n"
