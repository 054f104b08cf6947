"""Scenario configuration files: schema validation, defaults, canonical hashing."""

from __future__ import annotations

import copy
import hashlib
import json
import os
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import jsonschema
import yaml

from ..optics import GRAPH_PRESETS, GraphError, PathGraph, SignalArmModel, build_path_graph, preset_config
from ..scenarios import (
    BiphotonScenario,
    ConjectureModel,
    EmissionPlan,
    Geometry,
    ModelKind,
    TriggerSchedule,
    encode_message,
)

PRESET_DIR_ENV = "DCQE_PRESET_DIR"
UNIT_SUFFIXES = ("_m", "_s", "_ns", "_rad", "_mps")

_NUM = {"type": "number"}
_NONNEG = {"type": "number", "minimum": 0}
_POS = {"type": "number", "exclusiveMinimum": 0}
_VEC3 = {"type": "array", "items": _NUM, "minItems": 3, "maxItems": 3}
_UNIT_INTERVAL = {"type": "number", "minimum": 0, "maximum": 1}


def _obj(properties: dict, required: tuple = ()) -> dict:
    return {"type": "object", "properties": properties, "additionalProperties": False, "required": list(required)}


_GRAPH = {
    "oneOf": [
        {"type": "string", "enum": sorted(GRAPH_PRESETS)},
        _obj({"preset": {"type": "string", "enum": sorted(GRAPH_PRESETS)}, "params": {"type": "object"}}, ("preset",)),
        _obj(
            {
                "elements": {"type": "array", "items": {"type": "object"}},
                "sources": {"type": "object"},
                "detectors": {"type": "object"},
                "dark_ports": {"type": "array", "items": {"type": "string"}},
                "wavelength_m": _POS,
            },
            ("elements", "sources", "detectors"),
        ),
    ]
}

SCHEMA = _obj(
    {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "n_emissions": {"type": "integer", "minimum": 1},
        "graph": _GRAPH,
        "mark_graph": {"oneOf": [{"type": "null"}, _GRAPH]},
        "signal": _obj(
            {
                "wavelength_m": _POS,
                "slit_separation_m": _POS,
                "screen_distance_m": _POS,
                "envelope_sigma_m": _POS,
                "envelope_center_a_m": _NUM,
                "envelope_center_b_m": _NUM,
                "relative_source_phase_rad": _NUM,
                "grid_points": {"type": "integer", "minimum": 16},
                "grid_half_width_sigmas": _POS,
            }
        ),
        "geometry": _obj(
            {
                "d0_pos_m": _VEC3,
                "source_pos_m": _VEC3,
                "signal_path_m": _NONNEG,
                "detector_pos_m": {"type": "object", "additionalProperties": _VEC3},
                "lightlike_epsilon_ns": _NONNEG,
            }
        ),
        "emission": _obj(
            {
                "interval_s": {"oneOf": [{"type": "null"}, _POS]},
                "times_s": {"type": "array", "items": _NUM, "minItems": 1},
                "segments": {
                    "type": "array",
                    "minItems": 1,
                    "items": _obj({"count": {"type": "integer", "minimum": 1}, "interval_s": _POS}, ("count", "interval_s")),
                },
                "start_s": _NUM,
            }
        ),
        "model": _obj(
            {
                "kind": {"type": "string", "enum": [k.value for k in ModelKind]},
                "kappa": {"oneOf": [{"type": "null"}, {"type": "number", "minimum": -1, "maximum": 1}]},
                "conjectured_visibility": _UNIT_INTERVAL,
                "fringe_phase_rad": _NUM,
                "tau_c_s": _POS,
                "jitter_sigma_s": _NONNEG,
                "marking_probability": {
                    "oneOf": [
                        _UNIT_INTERVAL,
                        {
                            "type": "array",
                            "minItems": 1,
                            "items": _obj({"t_s": _NUM, "p": _UNIT_INTERVAL}, ("t_s", "p")),
                        },
                    ]
                },
                "signal_speed_mps": {"oneOf": [{"type": "null"}, _POS]},
                "idler_speed_mps": {"oneOf": [{"type": "null"}, _POS]},
            },
            ("kind",),
        ),
        "schedule": _obj(
            {
                "remote_distance_m": _NONNEG,
                "changes": {
                    "type": "array",
                    "items": _obj(
                        {"t_send_s": _NUM, "setting": {"type": "string", "enum": ["ERASE", "MARK"]}},
                        ("t_send_s", "setting"),
                    ),
                },
                "message": {
                    "oneOf": [
                        {"type": "null"},
                        _obj(
                            {"bits": {"type": "string", "pattern": "^[01]+$"}, "symbol_period_s": _POS, "start_s": _NUM},
                            ("bits", "symbol_period_s"),
                        ),
                    ]
                },
            }
        ),
        "analysis": _obj(
            {
                "coincidence_window_ns": _POS,
                "histogram_bins": {"type": "integer", "minimum": 16},
                "onset_window_emissions": {"type": "integer", "minimum": 500},
                "cusum_threshold": _POS,
                "min_visibility_shift": _NONNEG,
                "mi_bootstrap": {"type": "integer", "minimum": 0},
                "bootstrap_seed": {"type": "integer", "minimum": 0},
                "kappa_past": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "scan_segments": {"type": "integer", "minimum": 0},
                "ks_alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "tau_min_events": {"type": "integer", "minimum": 1},
            }
        ),
    },
    ("graph", "model"),
)

DEFAULTS: dict[str, Any] = {
    "name": "unnamed",
    "description": "",
    "seed": 0,
    "n_emissions": 100_000,
    "mark_graph": None,
    "signal": {
        "wavelength_m": 702e-9,
        "slit_separation_m": 0.30e-3,
        "screen_distance_m": 0.085,
        "envelope_sigma_m": 0.12e-3,
        "envelope_center_a_m": -0.15e-3,
        "envelope_center_b_m": 0.15e-3,
        "relative_source_phase_rad": 0.0,
        "grid_points": 2048,
        "grid_half_width_sigmas": 6.0,
    },
    "geometry": {
        "d0_pos_m": [0.0, 0.0, 0.0],
        "source_pos_m": [0.0, 0.0, 0.0],
        "signal_path_m": 0.0,
        "detector_pos_m": {},
        "lightlike_epsilon_ns": 0.01,
    },
    "emission": {"interval_s": 1e-4, "start_s": 0.0},
    "model": {
        "kappa": None,
        "conjectured_visibility": 1.0,
        "fringe_phase_rad": 0.0,
        "tau_c_s": 10e-6,
        "jitter_sigma_s": 0.0,
        "marking_probability": 0.0,
        "signal_speed_mps": None,
        "idler_speed_mps": None,
    },
    "schedule": {"remote_distance_m": 0.0, "changes": [], "message": None},
    "analysis": {
        "coincidence_window_ns": 3.0,
        "histogram_bins": 64,
        "onset_window_emissions": 500,
        "cusum_threshold": 2.0,
        "min_visibility_shift": 0.1,
        "mi_bootstrap": 200,
        "bootstrap_seed": 0,
        "kappa_past": 1.0,
        "scan_segments": 0,
        "ks_alpha": 0.01,
        "tau_min_events": 10_000,
    },
}


class ConfigError(ValueError):
    """Scenario config failed validation; ``errors`` lists every violation."""

    def __init__(self, errors: list[str], source: str | None = None):
        self.errors = list(errors)
        self.source = source
        head = f"{source}: " if source else ""
        super().__init__(head + "; ".join(self.errors))


def _known_keys(schema: Mapping) -> set[str]:
    keys: set[str] = set()
    for name, sub in schema.get("properties", {}).items():
        keys.add(name)
        keys |= _known_keys(sub)
        for alt in sub.get("oneOf", ()):
            keys |= _known_keys(alt)
    return keys


def _suffix_hint(key: str, allowed: list[str]) -> str | None:
    """Suggest the unit-suffixed key a bare ``key`` probably meant."""
    for candidate in allowed:
        for suffix in UNIT_SUFFIXES:
            if candidate.endswith(suffix):
                stem = candidate[: -len(suffix)]
                if key == stem or stem.endswith("_" + key):
                    return candidate
    return None


def _format_error(err: jsonschema.ValidationError) -> list[str]:
    where = "/".join(str(p) for p in err.absolute_path) or "<root>"
    if err.validator == "additionalProperties":
        allowed = sorted(err.schema.get("properties", {}))
        extra = sorted(set(err.instance) - set(allowed))
        out = []
        for key in extra:
            hint = _suffix_hint(key, allowed)
            if hint:
                out.append(f"{where}: key {key!r} lacks a unit suffix; expected {hint!r}")
            else:
                out.append(f"{where}: unknown key {key!r} (allowed: {', '.join(allowed)})")
        return out
    if err.validator == "oneOf" and err.context:
        # report the branch that got furthest instead of the opaque oneOf message
        best = max(err.context, key=lambda e: len(e.absolute_path))
        return _format_error(best) if best.absolute_path else [f"{where}: {err.message}"]
    if err.validator in ("minimum", "maximum", "exclusiveMinimum", "exclusiveMaximum"):
        return [f"{where}: value {err.instance!r} out of range ({err.validator} {err.validator_value})"]
    if err.validator == "enum" and where.endswith("kind"):
        return [f"{where}: unknown model kind {err.instance!r}"]
    if err.validator == "required":
        return [f"{where}: missing required key ({err.message})"]
    return [f"{where}: {err.message}"]


def _merge(defaults: Mapping, data: Mapping) -> dict:
    out = copy.deepcopy(dict(defaults))
    for key, value in data.items():
        if isinstance(value, Mapping) and isinstance(out.get(key), Mapping) and key != "detector_pos_m":
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _canonical_graph(graph: Any) -> Any:
    if graph is None:
        return None
    if isinstance(graph, str):
        return {"preset": graph, "params": {}}
    if "preset" in graph:
        return {"preset": graph["preset"], "params": dict(graph.get("params") or {})}
    return dict(graph)


def canonicalize(data: Mapping) -> dict:
    """Fill defaults and normalize shorthand forms; idempotent."""
    out = _merge(DEFAULTS, data)
    out["graph"] = _canonical_graph(out["graph"])
    out["mark_graph"] = _canonical_graph(out.get("mark_graph"))
    emission = out["emission"]
    if "times_s" in emission or "segments" in emission:
        emission["interval_s"] = None
    for section in ("signal", "geometry", "emission", "model", "schedule", "analysis"):
        for key, value in list(out[section].items()):
            if isinstance(value, int) and not isinstance(value, bool) and isinstance(DEFAULTS[section].get(key), float):
                out[section][key] = float(value)
    return out


def canonical_json(data: Mapping) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(data: Mapping) -> str:
    return hashlib.sha256(canonical_json(canonicalize(data)).encode()).hexdigest()


def _build_graph(spec: Mapping, label: str, errors: list[str]) -> PathGraph | None:
    try:
        if "preset" in spec:
            unknown = [k for k in spec["params"] if k not in _preset_params(spec["preset"])]
            if unknown:
                errors.append(f"{label}/params: unknown preset parameter(s) {unknown}")
                return None
            return build_path_graph(preset_config(spec["preset"], **spec["params"]))
        return build_path_graph(spec)
    except GraphError as exc:
        errors.append(f"{label}: {exc} (element {exc.element_id!r})")
    except (TypeError, ValueError) as exc:
        errors.append(f"{label}: {exc}")
    return None


def _preset_params(name: str) -> set[str]:
    import inspect

    return set(inspect.signature(GRAPH_PRESETS[name]).parameters)


@dataclass(frozen=True)
class ScenarioConfig:
    """A validated, canonicalized scenario config and the objects it describes."""

    data: dict
    scenario: BiphotonScenario
    model: ConjectureModel

    @property
    def seed(self) -> int:
        return int(self.data["seed"])

    @property
    def n_emissions(self) -> int:
        return int(self.data["n_emissions"])

    @property
    def analysis(self) -> dict:
        return self.data["analysis"]

    @property
    def message(self) -> dict | None:
        return self.data["schedule"].get("message")

    @property
    def hash(self) -> str:
        return hashlib.sha256(canonical_json(self.data).encode()).hexdigest()

    def to_json(self) -> str:
        return canonical_json(self.data)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.data, sort_keys=True)

    def with_overrides(self, seed: int | None = None, n: int | None = None) -> "ScenarioConfig":
        data = copy.deepcopy(self.data)
        if seed is not None:
            data["seed"] = int(seed)
        if n is not None:
            data["n_emissions"] = int(n)
        return config_from_dict(data)


def config_from_dict(raw: Mapping, source: str | None = None) -> ScenarioConfig:
    """Validate ``raw`` and build scenario objects, collecting every error."""
    if not isinstance(raw, Mapping):
        raise ConfigError(["top level must be a mapping"], source)
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors: list[str] = []
    for err in sorted(validator.iter_errors(raw), key=lambda e: list(map(str, e.absolute_path))):
        errors.extend(_format_error(err))
    if errors:
        raise ConfigError(errors, source)

    data = canonicalize(raw)
    graph = _build_graph(data["graph"], "graph", errors)
    mark_graph = _build_graph(data["mark_graph"], "mark_graph", errors) if data["mark_graph"] else None

    scenario = model = None
    try:
        signal = SignalArmModel(**data["signal"])
    except ValueError as exc:
        errors.append(f"signal: {exc}")
        signal = None
    geo = data["geometry"]
    geometry = Geometry(
        d0_pos_m=tuple(geo["d0_pos_m"]),
        source_pos_m=tuple(geo["source_pos_m"]),
        signal_path_m=geo["signal_path_m"],
        detector_pos_m={k: tuple(v) for k, v in geo["detector_pos_m"].items()},
        lightlike_epsilon_s=geo["lightlike_epsilon_ns"] * 1e-9,
    )
    em = data["emission"]
    try:
        emission = EmissionPlan(
            n_emissions=data["n_emissions"],
            interval_s=em.get("interval_s"),
            times_s=tuple(em["times_s"]) if "times_s" in em else None,
            start_s=em["start_s"],
            segments=tuple((s["count"], s["interval_s"]) for s in em["segments"]) if "segments" in em else None,
        )
        if emission.times_s is not None and len(emission.times_s) < emission.n_emissions:
            errors.append(f"emission/times_s: lists {len(emission.times_s)} times for n_emissions={emission.n_emissions}")
    except ValueError as exc:
        errors.append(f"emission: {exc}")
        emission = None
    sch = data["schedule"]
    try:
        if sch["message"] and sch["changes"]:
            errors.append("schedule: give either changes or message, not both")
        if sch["message"]:
            msg = sch["message"]
            schedule = encode_message(msg["bits"], msg["symbol_period_s"], msg.get("start_s", 0.0), sch["remote_distance_m"])
        else:
            schedule = TriggerSchedule(
                tuple((c["t_send_s"], c["setting"]) for c in sch["changes"]), sch["remote_distance_m"]
            )
    except ValueError as exc:
        errors.append(f"schedule: {exc}")
        schedule = None
    m = data["model"]
    try:
        pm = m["marking_probability"]
        model = ConjectureModel(
            kind=m["kind"],
            kappa=m["kappa"],
            conjectured_visibility=m["conjectured_visibility"],
            fringe_phase_rad=m["fringe_phase_rad"],
            tau_c_s=m["tau_c_s"],
            jitter_sigma_s=m["jitter_sigma_s"],
            marking_probability=pm if not isinstance(pm, list) else tuple((b["t_s"], b["p"]) for b in pm),
            signal_speed_mps=m["signal_speed_mps"],
            idler_speed_mps=m["idler_speed_mps"],
        )
        model.resolve_kappa(geo["signal_path_m"], sch["remote_distance_m"])
    except ValueError as exc:
        errors.append(f"model: {exc}")
    if errors:
        raise ConfigError(errors, source)
    scenario = BiphotonScenario(data["name"], signal, graph, geometry, emission, schedule, mark_graph)
    return ScenarioConfig(data, scenario, model)


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads ``1e-5`` as a float, as YAML 1.2 and JSON do."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"^[-+]?(?:[0-9][0-9_]*)(?:\.[0-9_]*)?[eE][-+]?[0-9]+$"),
    list("-+0123456789"),
)


def load_config_text(text: str, source: str | None = None) -> ScenarioConfig:
    try:
        raw = yaml.load(text, Loader=_Loader)
    except yaml.YAMLError as exc:
        raise ConfigError([f"not valid YAML/JSON: {exc}"], source) from None
    return config_from_dict(raw or {}, source)


def parse_scenario(path: str | os.PathLike) -> ScenarioConfig:
    """Read and validate a YAML (or JSON) scenario file.

    Raises ``ConfigError`` listing every schema violation, ``OSError`` if
    the file cannot be read.
    """
    path = Path(path)
    return load_config_text(path.read_text(), str(path))


# ---------------------------------------------------------------------------
# presets


def _preset_dirs() -> list[Path]:
    dirs = []
    if os.environ.get(PRESET_DIR_ENV):
        dirs.append(Path(os.environ[PRESET_DIR_ENV]))
    dirs.append(Path(str(resources.files("dcqe") / "presets")))
    return dirs


def list_presets() -> list[str]:
    names: set[str] = set()
    for d in _preset_dirs():
        if d.is_dir():
            names |= {p.stem for p in d.glob("*.yaml")}
    return sorted(names)


def preset_path(name: str) -> Path:
    for d in _preset_dirs():
        candidate = d / f"{name}.yaml"
        if candidate.is_file():
            return candidate
    raise KeyError(f"unknown scenario preset {name!r}; known: {list_presets()}")


def load_preset(name: str) -> ScenarioConfig:
    return parse_scenario(preset_path(name))


def resolve_config(ref: str | os.PathLike) -> ScenarioConfig:
    """A config given as a file path or a preset name."""
    path = Path(ref)
    if path.suffix in (".yaml", ".yml", ".json") or path.exists():
        return parse_scenario(path)
    return load_preset(str(ref))
