"""Execute validated configs: dynamics, spectra, parameter scans and benchmarks.

All computation finishes before any data file is written; the output
directory is probed for writability first so I/O problems surface early.
"""

from __future__ import annotations

import contextlib
import dataclasses
import random
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from .. import threecavity as tc
from ..analytic import analytic_spectrum, default_tau_max, rabi_period
from ..bench import run_scaling_suite
from ..quantum import TimeGrid, expectation, propagate, state_violations
from ..sensor import WeakCouplingWarning, sensor_spectrum, weak_coupling_message
from .config import ExperimentConfig, Observable, dump_yaml
from .io import (
    BENCH_COLUMNS,
    POPULATION_TIME,
    TRPS_COLUMNS,
    Table,
    TRPSRows,
    ensure_writable,
    write_tables,
    write_text_atomic,
)

SCAN_COLUMNS = {"g": "g_GHz", "eta": "eta_GHz", "delta_initial": "delta_initial_GHz", "t_switch": "t_switch_ns"}


class InvariantViolation(RuntimeError):
    """A propagated state broke a density-matrix invariant."""


@dataclass
class RunResult:
    tables: list
    manifest: dict
    files: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    maps: dict = field(default_factory=dict)  # method -> list of TRPSMap


@contextlib.contextmanager
def forbid_rng():
    """Make any use of the stdlib or numpy global RNG raise."""

    def refuse(*args, **kwargs):
        raise RuntimeError("random number generation used in a --seedless run")

    targets = [(random, name) for name in ("random", "seed", "randint", "uniform", "gauss", "shuffle")]
    targets += [
        (np.random, name)
        for name in ("default_rng", "seed", "rand", "randn", "random", "normal", "uniform", "RandomState")
    ]
    saved = [(mod, name, getattr(mod, name)) for mod, name in targets]
    try:
        for mod, name in targets:
            setattr(mod, name, refuse)
        yield
    finally:
        for mod, name, value in saved:
            setattr(mod, name, value)


def _check(rhos, where: str) -> None:
    problems = state_violations(rhos)
    if problems:
        raise InvariantViolation(f"{where}: density-matrix invariant violated: {'; '.join(problems)}")


def _grid(cfg: ExperimentConfig, schedule, params, stride: int) -> TimeGrid:
    return tc.time_grid(schedule, params, cfg.grids["duration"], cfg.grids["dt"], multiple_of=stride)


def _population_rows(rhos, times, observables: list[Observable], stride: int, lead=()) -> list:
    ops = [o.operator for o in observables]
    picked = rhos[::stride]
    cols = [np.real(expectation(picked, o.conj().T @ o)) for o in ops]
    return [
        [float(t), *lead, *(float(c[i]) for c in cols)]
        for i, t in enumerate(times[::stride])
    ]


def run_dynamics(cfg: ExperimentConfig, schedule, resolved: dict) -> Table:
    stride = cfg.grids["output_stride"]
    grid = _grid(cfg, schedule, cfg.model, stride)
    gen = tc.build_time_dependent_generator(schedule, cfg.model)
    rhos = propagate(tc.initial_state(cfg.initial_state), gen, grid)
    _check(rhos, "dynamics")
    resolved["dt"] = grid.dt
    return Table(
        "populations",
        [POPULATION_TIME] + [o.label for o in cfg.observables],
        _population_rows(rhos, grid.times, cfg.observables, stride),
    )


def run_spectrum(
    cfg: ExperimentConfig, schedule, resolved: dict, threads: int = 1, result_maps: dict | None = None
) -> list[Table]:
    """Spectra for every resolution and observable; maps are also collected
    per method into ``result_maps``."""
    result_maps = {} if result_maps is None else result_maps
    sp = cfg.spectrum
    params = cfg.model
    stride = cfg.grids["output_stride"]
    substeps = sp["substeps"]
    grid = _grid(cfg, schedule, params, stride)
    gen = tc.build_time_dependent_generator(schedule, params)
    rho0 = tc.initial_state(cfg.initial_state)
    _check(propagate(rho0, gen, grid), "spectrum reference run")
    resolved["dt"] = grid.dt
    methods = ["sensor", "analytic"] if sp["method"] == "both" else [sp["method"]]
    maps: dict = {m: [] for m in methods}
    agreement = []
    for delta_s, step in zip(sp["delta_s"], sp["omega_step"]):
        omegas = np.arange(sp["omega_min"], sp["omega_max"] + 0.5 * step, step) + params.omega0
        message = weak_coupling_message(sp["epsilon"], delta_s, params.g)
        if message and "sensor" in methods:
            warnings.warn(message, WeakCouplingWarning)
        for obs in cfg.observables:
            pair = {}
            if "sensor" in methods:
                pair["sensor"] = sensor_spectrum(
                    gen, rho0, obs.operator, omegas, grid, delta_s, sp["epsilon"],
                    label=obs.label, stride=stride, threads=threads,
                    chunk=None if threads <= 1 else -(-omegas.size // threads),
                )
                problems = pair["sensor"].diagnostics["state_violations"]
                if problems:
                    raise InvariantViolation(
                        f"sensor run {obs.label} at delta_s={delta_s:g}: "
                        f"density-matrix invariant violated: {'; '.join(problems)}"
                    )
            if "analytic" in methods:
                tau_max = sp["tau_max"] or default_tau_max(delta_s, rabi_period(schedule, params))
                coarse = TimeGrid(grid.t0, grid.t1, grid.dt * substeps)
                pair["analytic"] = analytic_spectrum(
                    gen, rho0, obs.operator, omegas, coarse, delta_s, tau_max,
                    substeps=substeps, label=obs.label, stride=stride // substeps,
                )
            for method, m in pair.items():
                maps[method].append(m)
            if len(pair) == 2:
                a, s = pair["analytic"].intensities, pair["sensor"].intensities
                agreement.append(
                    {
                        "observable": obs.label,
                        "delta_s_GHz": delta_s,
                        "max_abs_diff_rel": float(np.max(np.abs(s - a)) / np.max(np.abs(a))),
                    }
                )
    if agreement:
        resolved["method_agreement"] = agreement
    result_maps.update(maps)
    return [
        Table(f"trps_{m}", list(TRPS_COLUMNS), TRPSRows(maps[m], params.omega0)) for m in methods
    ]


def run_scan(cfg: ExperimentConfig, resolved: dict) -> Table:
    scan = cfg.scan
    name = scan["parameter"]
    stride = cfg.grids["output_stride"]
    rows = []
    points = []
    for value in scan["values"]:
        params, overrides = cfg.model, {}
        if name in ("g", "eta"):
            params = dataclasses.replace(cfg.model, **{name: value})
        else:
            overrides[name] = value
        schedule = cfg.build_schedule(params, **overrides)
        grid = _grid(cfg, schedule, params, stride)
        gen = tc.build_time_dependent_generator(schedule, params)
        rhos = propagate(tc.initial_state(cfg.initial_state), gen, grid)
        _check(rhos, f"scan {name}={value:g}")
        rows += _population_rows(rhos, grid.times, cfg.observables, stride, lead=(value,))
        points.append({name: value, "t_switch": schedule.t_switch, "dt": grid.dt})
    resolved["scan_points"] = points
    return Table(
        "scan",
        [POPULATION_TIME, SCAN_COLUMNS[name]] + [o.label for o in cfg.observables],
        rows,
    )


def run_bench(cfg: ExperimentConfig, resolved: dict) -> Table:
    b = cfg.bench or {"repeats": 3, "sizes_nt": None, "sizes_nw": None}
    reports = run_scaling_suite("bench-fig7", b["sizes_nt"], b["sizes_nw"], b["repeats"])
    resolved["fits"] = [
        {
            "method": r.method,
            "axis": r.axis,
            "fitted_slope": r.fitted_slope,
            "slope_stderr": r.slope_stderr,
            "monotone": r.monotone,
            "ops_match": r.ops_match,
            "fixed_size": r.fixed_size,
        }
        for r in reports
    ]
    rows = [[row[c] for c in BENCH_COLUMNS] for r in reports for row in r.rows()]
    return Table("bench", list(BENCH_COLUMNS), rows)


def _materialized(cfg: ExperimentConfig, schedule, resolved: dict) -> dict:
    data = cfg.as_dict()
    scan_param = cfg.scan["parameter"] if cfg.scan and "scan" in cfg.tasks else None
    if scan_param is None:
        if isinstance(data["schedule"]["t_switch"], str):
            data["schedule"]["t_switch"] = schedule.t_switch
        if data["grids"]["dt"] is None and "dt" in resolved:
            data["grids"]["dt"] = resolved["dt"]
    return data


def run_config(
    cfg: ExperimentConfig,
    out_dir: str | Path | None = None,
    fmt: str | None = None,
    threads: int = 1,
    seedless: bool = False,
    tasks: list | None = None,
) -> RunResult:
    """Run ``tasks`` (default: the config's own) and write tables plus ``manifest.yaml``."""
    tasks = list(tasks or cfg.tasks)
    out = ensure_writable(out_dir or cfg.output["dir"])
    fmt = fmt or cfg.output["format"]
    resolved: dict = {}
    tables: list[Table] = []
    maps: dict = {}
    guard = forbid_rng() if seedless else contextlib.nullcontext()
    with warnings.catch_warnings(record=True) as caught, guard:
        warnings.simplefilter("always")
        needs_schedule = any(t in tasks for t in ("dynamics", "spectrum")) or (
            "scan" not in tasks and "bench" not in tasks
        )
        schedule = cfg.build_schedule() if needs_schedule else None
        for task in tasks:
            if task == "dynamics":
                tables.append(run_dynamics(cfg, schedule, resolved))
            elif task == "spectrum":
                tables.extend(run_spectrum(cfg, schedule, resolved, threads, maps))
            elif task == "scan":
                tables.append(run_scan(cfg, resolved))
            elif task == "bench":
                tables.append(run_bench(cfg, resolved))
    messages = sorted({str(w.message) for w in caught})
    data = _materialized(cfg, schedule, resolved)
    data["tasks"] = tasks
    data["output"] = {"dir": str(out), "format": fmt}
    data["manifest"] = {
        "code_version": __version__,
        "seedless": bool(seedless),
        "threads": int(threads),
        "files": [f"{t.name}.{fmt}" for t in tables],
        "warnings": messages,
        "resolved": resolved,
    }
    files = write_tables(out, tables, fmt)
    manifest_path = out / "manifest.yaml"
    write_text_atomic(manifest_path, dump_yaml(data))
    return RunResult(tables, data, files + [manifest_path], messages, maps)
