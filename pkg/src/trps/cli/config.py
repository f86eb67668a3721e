"""Experiment configuration: YAML schema, validation and default materialization.

A config is a YAML mapping. Everything except ``model``/``schedule`` has a
default; ``materialize`` fills every default in so the result can be saved
as a manifest and fed back unchanged. Unknown keys are rejected.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import jsonschema
import yaml

from .. import threecavity as tc
from ..sensor import DEFAULT_EPSILON

TASKS = ("dynamics", "spectrum", "scan", "bench")
METHODS = ("sensor", "analytic", "both")
SCAN_PARAMETERS = ("g", "eta", "delta_initial", "t_switch")

DEFAULT_OBSERVABLES = ["sigma", "a", "b", "c"]
DEFAULT_OUTPUT_STRIDE = 64
DEFAULT_SUBSTEPS = 8
OMEGA_RANGE = (-700.0, 700.0)
KEY_ORDER = (
    "preset", "tasks", "model", "schedule", "initial_state", "observables",
    "grids", "spectrum", "scan", "bench", "output",
)


class ConfigError(ValueError):
    """Invalid configuration; ``path`` locates the offending field."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


_number = {"type": "number"}
_positive = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_mode = {"type": "string", "enum": list(tc.MODES) + ["tls", "e"]}

SCHEMA: dict = {
    "type": "object",
    "additionalProperties": False,
    "required": ["model", "schedule"],
    "properties": {
        "preset": {"type": "string"},
        "tasks": {
            "type": "array",
            "items": {"enum": list(TASKS)},
            "minItems": 1,
            "uniqueItems": True,
        },
        "model": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "g": _number,
                "eta": _number,
                "gamma": _number,
                "kappa": _number,
                "omega0": _number,
            },
        },
        "schedule": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind", "delta_initial"],
            "properties": {
                "kind": {"enum": list(tc.DetuningSchedule.KINDS)},
                "delta_initial": _number,
                "delta_final": {"type": ["number", "null"]},
                "t_switch": {
                    "oneOf": [_number, {"enum": list(tc.SWITCH_PHASES)}]
                },
                "fall_width": {"type": ["number", "null"]},
            },
        },
        "initial_state": {"type": "string"},
        "observables": {
            "type": "array",
            "minItems": 1,
            "items": {
                "oneOf": [
                    _mode,
                    {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["label", "terms"],
                        "properties": {
                            "label": {"type": "string", "pattern": "^[A-Za-z0-9_+\\-.()/]+$"},
                            "terms": {
                                "type": "object",
                                "minProperties": 1,
                                "propertyNames": _mode,
                                "additionalProperties": _number,
                            },
                        },
                    },
                ]
            },
        },
        "grids": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "duration": _positive,
                "dt": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "output_stride": {"type": "integer", "minimum": 1},
            },
        },
        "spectrum": {
            "type": ["object", "null"],
            "additionalProperties": False,
            "properties": {
                "method": {"enum": list(METHODS)},
                "delta_s": {"type": "array", "items": _positive, "minItems": 1},
                "omega_min": _number,
                "omega_max": _number,
                "omega_step": {
                    "oneOf": [
                        {"type": "null"},
                        _positive,
                        {"type": "array", "items": _positive, "minItems": 1},
                    ]
                },
                "epsilon": _nonneg,
                "substeps": {"type": "integer", "minimum": 1},
                "tau_max": {"type": ["number", "null"], "exclusiveMinimum": 0},
            },
        },
        "scan": {
            "type": ["object", "null"],
            "additionalProperties": False,
            "required": ["parameter", "values"],
            "properties": {
                "parameter": {"enum": list(SCAN_PARAMETERS)},
                "values": {"type": "array", "items": _number, "minItems": 1},
            },
        },
        "bench": {
            "type": ["object", "null"],
            "additionalProperties": False,
            "properties": {
                "repeats": {"type": "integer", "minimum": 3},
                "sizes_nt": {"type": ["object", "null"]},
                "sizes_nw": {"type": ["object", "null"]},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dir": {"type": "string"},
                "format": {"enum": ["csv", "json"]},
            },
        },
        # written by the runner; accepted so a manifest is itself a config
        "manifest": {"type": "object"},
    },
}


@dataclass(frozen=True)
class Observable:
    label: str
    terms: dict

    @classmethod
    def parse(cls, item) -> "Observable":
        if isinstance(item, str):
            name = {"tls": "sigma", "e": "sigma"}.get(item, item)
            return cls(name, {name: 1.0})
        return cls(item["label"], {k: float(v) for k, v in item["terms"].items()})

    @property
    def operator(self):
        return tc.mode_operator(self.terms)

    def as_config(self):
        if len(self.terms) == 1 and self.terms.get(self.label) == 1.0:
            return self.label
        return {"label": self.label, "terms": dict(self.terms)}


@dataclass
class ExperimentConfig:
    """Validated, fully materialized experiment description."""

    preset: str
    tasks: list
    model: tc.ModelParams
    schedule: dict
    initial_state: str
    observables: list
    grids: dict
    spectrum: dict | None
    scan: dict | None
    bench: dict | None
    output: dict
    raw: dict = field(repr=False, default_factory=dict)

    def build_schedule(
        self, params: tc.ModelParams | None = None, **overrides
    ) -> tc.DetuningSchedule:
        """Schedule with any symbolic switch phase resolved against ``params``."""
        s = {**self.schedule, **overrides}
        params = params or self.model
        t_switch = s["t_switch"]
        if isinstance(t_switch, str):
            t_switch = tc.switch_phase_time(t_switch, s["delta_initial"], params, self.initial_state)
        if s["kind"] == "constant":
            s["delta_final"] = s["delta_initial"]
        return tc.DetuningSchedule(
            s["kind"], s["delta_initial"], s.get("delta_final"), t_switch, s.get("fall_width")
        )

    def omega_steps(self) -> list[float]:
        return list(self.spectrum["omega_step"])

    def as_dict(self) -> dict:
        return copy.deepcopy(self.raw)


def _path(err: jsonschema.ValidationError) -> str:
    return "/".join(str(p) for p in err.absolute_path) or "<root>"


def validate_schema(data: Any) -> None:
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping", "<root>")
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        # oneOf failures are clearer reported through their best sub-error
        best = jsonschema.exceptions.best_match([err])
        raise ConfigError(best.message, _path(best))


def default_omega_step(delta_s: float) -> float:
    """Frequency-grid spacing: 2 GHz for the 5 GHz resolution, 5 GHz otherwise."""
    return 2.0 if delta_s <= 5.0 else 5.0


def materialize(data: dict) -> dict:
    """Schema-check ``data`` and return a copy with every default filled in."""
    validate_schema(data)
    d = copy.deepcopy(data)
    d.pop("manifest", None)
    d.setdefault("preset", "custom")
    d.setdefault("tasks", ["dynamics"])
    model = tc.ModelParams()
    d["model"] = {
        k: float(d["model"].get(k, getattr(model, k)))
        for k in ("g", "eta", "gamma", "kappa", "omega0")
    }
    s = d["schedule"]
    s["delta_initial"] = float(s["delta_initial"])
    s.setdefault("delta_final", None)
    s.setdefault("t_switch", 0.0)
    s.setdefault("fall_width", None)
    if s["kind"] == "constant":
        s["delta_final"] = s["delta_initial"]
    for key in ("delta_final", "fall_width"):
        if s[key] is not None:
            s[key] = float(s[key])
    if not isinstance(s["t_switch"], str):
        s["t_switch"] = float(s["t_switch"])
    d.setdefault("initial_state", "e")
    d["observables"] = [
        Observable.parse(o).as_config() for o in d.get("observables", DEFAULT_OBSERVABLES)
    ]
    g = d.setdefault("grids", {})
    g.setdefault("duration", 0.4)
    g["duration"] = float(g["duration"])
    g.setdefault("dt", None)
    g.setdefault("output_stride", DEFAULT_OUTPUT_STRIDE)
    sp = d.get("spectrum")
    if sp is not None:
        sp.setdefault("method", "sensor")
        sp["delta_s"] = [float(x) for x in sp.get("delta_s", [50.0])]
        sp.setdefault("omega_min", OMEGA_RANGE[0])
        sp.setdefault("omega_max", OMEGA_RANGE[1])
        step = sp.get("omega_step")
        if step is None:
            step = [default_omega_step(x) for x in sp["delta_s"]]
        elif not isinstance(step, list):
            step = [step] * len(sp["delta_s"])
        sp["omega_step"] = [float(x) for x in step]
        sp["omega_min"] = float(sp["omega_min"])
        sp["omega_max"] = float(sp["omega_max"])
        sp.setdefault("epsilon", DEFAULT_EPSILON)
        sp["epsilon"] = float(sp["epsilon"])
        sp.setdefault("substeps", DEFAULT_SUBSTEPS)
        sp.setdefault("tau_max", None)
    d.setdefault("spectrum", None)
    d.setdefault("scan", None)
    if d["scan"] is not None:
        d["scan"]["values"] = [float(v) for v in d["scan"]["values"]]
    b = d.get("bench")
    if b is not None:
        b.setdefault("repeats", 3)
        b.setdefault("sizes_nt", None)
        b.setdefault("sizes_nw", None)
    d.setdefault("bench", None)
    out = d.setdefault("output", {})
    out.setdefault("dir", "out")
    out.setdefault("format", "csv")
    return {key: d[key] for key in KEY_ORDER}


def _check_physics(d: dict) -> tc.ModelParams:
    try:
        params = tc.ModelParams(**d["model"])
    except ValueError as exc:
        raise ConfigError(f"model invariant violated: {exc}", "model") from None
    s = d["schedule"]
    try:
        tc.DetuningSchedule(
            s["kind"],
            s["delta_initial"],
            s["delta_final"],
            0.0 if isinstance(s["t_switch"], str) else s["t_switch"],
            s["fall_width"],
        )
    except ValueError as exc:
        raise ConfigError(f"schedule invariant violated: {exc}", "schedule") from None
    if isinstance(s["t_switch"], str) and s["kind"] == "constant":
        raise ConfigError("a switch phase needs a step or gaussian-fall schedule", "schedule/t_switch")
    try:
        tc.initial_state(d["initial_state"])
    except ValueError as exc:
        raise ConfigError(str(exc), "initial_state") from None
    g = d["grids"]
    sp = d["spectrum"]
    if sp is not None:
        if sp["omega_max"] <= sp["omega_min"]:
            raise ConfigError("omega_max must exceed omega_min", "spectrum/omega_max")
        if len(sp["omega_step"]) != len(sp["delta_s"]):
            raise ConfigError(
                "one omega_step per delta_s entry is required", "spectrum/omega_step"
            )
        if g["output_stride"] % sp["substeps"]:
            raise ConfigError(
                f"output_stride {g['output_stride']} is not a multiple of substeps "
                f"{sp['substeps']}",
                "spectrum/substeps",
            )
    if "spectrum" in d["tasks"] and sp is None:
        raise ConfigError("task 'spectrum' needs a spectrum section", "spectrum")
    if "scan" in d["tasks"] and d["scan"] is None:
        raise ConfigError("task 'scan' needs a scan section", "scan")
    scan = d["scan"]
    if scan is not None:
        name = scan["parameter"]
        for i, v in enumerate(scan["values"]):
            if name in ("g", "eta") and not v > 0:
                raise ConfigError(f"{name} must be positive, got {v}", f"scan/values/{i}")
            if name == "t_switch" and s["kind"] == "constant":
                raise ConfigError("t_switch scan needs a switching schedule", "scan/parameter")
    return params


def config_from_dict(data: dict) -> ExperimentConfig:
    """Validate ``data`` (schema, then physics) and build an ExperimentConfig."""
    d = materialize(data)
    params = _check_physics(d)
    return ExperimentConfig(
        preset=d["preset"],
        tasks=list(d["tasks"]),
        model=params,
        schedule=dict(d["schedule"]),
        initial_state=d["initial_state"],
        observables=[Observable.parse(o) for o in d["observables"]],
        grids=dict(d["grids"]),
        spectrum=d["spectrum"],
        scan=d["scan"],
        bench=d["bench"],
        output=dict(d["output"]),
        raw=d,
    )


def load_config(path: str | Path) -> ExperimentConfig:
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"not valid YAML: {exc}", str(path)) from None
    return config_from_dict(data)


def dump_yaml(data: dict) -> str:
    return yaml.safe_dump(data, sort_keys=False, default_flow_style=None, width=100)
