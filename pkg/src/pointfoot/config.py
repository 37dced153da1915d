"""Scenario configuration: loading, dotted overrides and validation."""

from __future__ import annotations

import copy
import json
from importlib import resources
from pathlib import Path

import jsonschema

from pointfoot.errors import ConfigError

SCENARIOS = ("split_terrain", "stepping", "undirected_walking")

_GAIN = {
    "type": "object",
    "properties": {"K": {"type": "number", "minimum": 0}, "I": {"type": "number", "minimum": 0},
                   "D": {"type": "number", "minimum": 0}},
    "required": ["K", "I", "D"],
    "additionalProperties": False,
}
_GAIN_TABLE = {"type": "object", "additionalProperties": _GAIN}
_TORQUE = {
    "type": "object",
    "properties": {"K_P": {"type": "number", "minimum": 0}, "K_I": {"type": "number", "minimum": 0}},
    "required": ["K_P", "K_I"],
    "additionalProperties": False,
}
_POS = {"type": "number", "exclusiveMinimum": 0}
_VEC3 = {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}

SCHEMA = {
    "type": "object",
    "required": ["scenario", "model", "sim"],
    "properties": {
        "scenario": {"enum": list(SCENARIOS)},
        "description": {"type": "string"},
        "model": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "sim": {
            "type": "object",
            "properties": {
                "dt": {"type": "number", "minimum": 1e-5, "maximum": 1e-3},
                "control_dt": {"type": "number", "minimum": 1e-4, "maximum": 1e-2},
                "duration": _POS,
                "integrator": {"enum": ["rk4", "euler"]},
                "torque_mode": {"enum": ["ideal", "sea-lag"]},
                "omit_coriolis": {"type": "boolean"},
                "state_source": {"enum": ["ground-truth", "estimator"]},
                "baumgarte": {"type": "object", "properties": {"kp": {"type": "number", "minimum": 0},
                                                                "kd": {"type": "number", "minimum": 0}}},
                "log_every": {"type": "integer", "minimum": 1},
                "dry_friction": {"type": "number", "minimum": 0},
                "com_noise": {"type": "number", "minimum": 0},
            },
            "additionalProperties": False,
        },
        "terrain": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["flat", "split"]},
                "angle_deg": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 90},
                "half_width": _POS,
                "mu": {"type": "number", "minimum": 0},
            },
            "additionalProperties": False,
        },
        "stance": {
            "type": "object",
            "properties": {
                "com_height": _POS,
                "foot_x": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                "foot_y": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                "com_velocity": {"type": "array", "items": {"type": "number"}, "minItems": 1, "maxItems": 2},
            },
            "additionalProperties": False,
        },
        "planarizer": {"type": "array", "items": {"type": "string"}},
        "gains": {
            "type": "object",
            "properties": {
                "position": _GAIN_TABLE,
                "position_dual": _GAIN_TABLE,
                "position_single": _GAIN_TABLE,
                "torque": {
                    "type": "object",
                    "properties": {
                        "default": {"type": "object", "additionalProperties": _TORQUE},
                        "swing": {"type": "object", "additionalProperties": _TORQUE},
                    },
                    "additionalProperties": False,
                },
                "internal_force": {"type": "object", "properties": {"K_F": {"type": "number", "minimum": 0}},
                                   "additionalProperties": False},
            },
            "additionalProperties": False,
        },
        "internal_force": {
            "type": "object",
            "properties": {"enabled": {"type": "boolean"}, "ref": {"type": "number"}},
            "additionalProperties": False,
        },
        "com_reference": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["hold", "ellipse"]},
                "amplitude": {"type": "array", "items": {"type": "number", "minimum": 0},
                              "minItems": 2, "maxItems": 2},
                "period": _POS,
                "ramp": {"type": "number", "minimum": 0},
            },
            "additionalProperties": False,
        },
        "disturbances": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {"t": {"type": "number", "minimum": 0}, "duration": _POS, "force": _VEC3,
                               "body": {"type": "string"}, "point": {"type": "string"}},
                "required": ["t", "duration", "force"],
                "additionalProperties": False,
            },
        },
        "phases": {
            "type": "object",
            "properties": {"transition": {"type": "number", "minimum": 0}, "lifting": _POS, "landing": _POS,
                           "dual": _POS, "t_prime": {"type": "number"}},
            "additionalProperties": False,
        },
        "stepping": {
            "type": "object",
            "properties": {"steps": {"type": "integer", "minimum": 1}, "transitions": {"type": "boolean"},
                           "apex": _POS, "touchdown_speed": {"type": "number", "minimum": 0}},
            "additionalProperties": False,
        },
        "planner": {
            "type": "object",
            "properties": {
                "t_prime": {"type": "number"},
                "impact_bias": {"type": "number"},
                "impact_bias_y": {"type": "number"},
                "y_dot_max": {"type": "number"},
                "y_dot_min": {"type": "number"},
                "reach": _POS,
                "reach_y": _POS,
                "min_width": {"type": "number", "minimum": 0},
                "include_transition": {"type": "boolean"},
                "observer_gain": {"type": "number", "minimum": 0, "maximum": 1},
                "trigger_fraction": {"type": "number"},
                "max_extension": {"type": "number", "minimum": 0},
                "dual_coast": {"type": "number", "minimum": 0},
            },
            "additionalProperties": False,
        },
        "walking": {
            "type": "object",
            "properties": {"steps": {"type": "integer", "minimum": 1}, "apex": _POS,
                           "touchdown_speed": {"type": "number", "minimum": 0}},
            "additionalProperties": False,
        },
        "fall": {
            "type": "object",
            "properties": {"com_height_min": {"type": "number"}, "pitch_max": _POS, "roll_max": _POS},
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}


def _dotted(path) -> str:
    return ".".join(str(p) for p in path) or "<root>"


def bundled_configs() -> dict:
    """Name -> path of the shipped scenario configs."""
    root = resources.files("pointfoot") / "configs"
    return {p.name[:-5]: Path(str(p)) for p in root.iterdir() if p.name.endswith(".json")}


def load_config(path_or_name) -> dict:
    shipped = bundled_configs()
    if str(path_or_name) in shipped:
        path = shipped[str(path_or_name)]
    else:
        path = Path(path_or_name)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}", problems=[("<file>", str(path))])
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})", problems=[("<file>", str(exc))]) from None


def parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(cfg: dict, overrides) -> dict:
    """Apply ``key.path=value`` strings; values are parsed as JSON when possible."""
    out = copy.deepcopy(cfg)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value", problems=[(item, "missing '='")])
        key, text = item.split("=", 1)
        parts = key.strip().split(".")
        node = out
        for p in parts[:-1]:
            if isinstance(node, list):
                node = node[int(p)]
                continue
            node = node.setdefault(p, {})
            if not isinstance(node, (dict, list)):
                raise ConfigError(f"override {key!r} descends into a scalar", problems=[(key, "not a mapping")])
        last = parts[-1]
        if isinstance(node, list):
            node[int(last)] = parse_value(text)
        else:
            node[last] = parse_value(text)
    return out


def problems(cfg: dict) -> list:
    """(dotted path, message) for every schema or invariant violation."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    out = [(_dotted(e.absolute_path), e.message) for e in sorted(validator.iter_errors(cfg), key=str)]
    if out:
        return out
    phases = cfg.get("phases", {})
    if "t_prime" in phases and not phases["t_prime"] > 0:
        out.append(("phases.t_prime", "t' must be positive"))
    planner = cfg.get("planner", {})
    if "t_prime" in planner and not planner["t_prime"] > 0:
        out.append(("planner.t_prime", "t' must be positive"))
    ymax, ymin = planner.get("y_dot_max", 0.65), planner.get("y_dot_min", 0.1)
    if not ymax > ymin > 0:
        out.append(("planner.y_dot_max", "need y_dot_max > y_dot_min > 0"))
    if "trigger_fraction" in planner and not 0 < planner["trigger_fraction"] <= 1:
        out.append(("planner.trigger_fraction", "must lie in (0, 1]"))
    sim = cfg["sim"]
    if sim.get("control_dt", 1e-3) < sim.get("dt", 1e-4):
        out.append(("sim.control_dt", "control period shorter than the plant step"))
    else:
        ratio = sim.get("control_dt", 1e-3) / sim.get("dt", 1e-4)
        if abs(ratio - round(ratio)) > 1e-6:
            out.append(("sim.control_dt", "must be an integer multiple of sim.dt"))
    if cfg["scenario"] == "split_terrain" and cfg.get("terrain", {}).get("kind", "split") != "split":
        out.append(("terrain.kind", "split_terrain needs the split terrain"))
    return out


def validate(cfg: dict) -> dict:
    probs = problems(cfg)
    if probs:
        raise ConfigError("invalid config: " + "; ".join(f"{p}: {m}" for p, m in probs), problems=probs)
    return cfg


def resolve(path_or_name, overrides=()) -> dict:
    return validate(apply_overrides(load_config(path_or_name), overrides))
