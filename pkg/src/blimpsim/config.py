"""Simulator configuration: one JSON document, schema-validated.

Every field has a default; unknown keys are rejected at every level.  The
document decomposes into the runtime dataclasses (world geometry, vehicle
constants, controller gains, autonomy thresholds, perception constants,
radio model, camera) plus the experiment grid consumed by the CLI.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import jsonschema

from blimpsim.autonomy import AutonomyConfig
from blimpsim.comms import RadioModel
from blimpsim.control import ControlConfig, Gains
from blimpsim.dynamics import BlimpParams
from blimpsim.perception import ColorFamily, PerceptionConfig
from blimpsim.rendering import CameraModel
from blimpsim.world import (
    DEFAULT_AC_UNITS,
    DEFAULT_HOOPS,
    ConfigError,
    GoalShape,
    WorldConfig,
)


def _num(minimum=None, maximum=None, exclusive_min=None):
    s = {"type": "number"}
    if minimum is not None:
        s["minimum"] = minimum
    if maximum is not None:
        s["maximum"] = maximum
    if exclusive_min is not None:
        s["exclusiveMinimum"] = exclusive_min
    return s


def _vec(n):
    return {"type": "array", "items": {"type": "number"},
            "minItems": n, "maxItems": n}


def _obj(props):
    return {"type": "object", "properties": props, "additionalProperties": False}


_FAMILY_SCHEMA = {
    "type": ["object", "null"],
    "properties": {
        "name": {"type": "string"},
        "mu": _vec(2),
        "sigma": {"type": "array", "items": _vec(2), "minItems": 2, "maxItems": 2},
    },
    "required": ["mu", "sigma"],
    "additionalProperties": False,
}

_GRID_SCHEMA = _obj({
    "n_blimps": {"type": "array", "items": {"type": "integer", "minimum": 1}},
    "n_balloons": {"type": "array", "items": {"type": "integer", "minimum": 1}},
    "duration": _num(exclusive_min=0),
})

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "seed": {"type": "integer", "minimum": 0},
        "arena": _vec(3),
        "n_blimps": {"type": "integer", "minimum": 1, "maximum": 16},
        "n_balloons": {"type": "integer", "minimum": 0, "maximum": 32},
        "balloon_spawn": _num(exclusive_min=0),
        "blimp_spawn": _num(exclusive_min=0),
        "scenario": {"enum": ["delivery", "pickup"]},
        "redeploy_delay": _num(minimum=0),
        "station_pos": _vec(3),
        "state_dir": {"type": "string"},
        "blimp": _obj({
            "m": _num(exclusive_min=0),
            "J": _vec(3),
            "d_f": _vec(3),
            "d_tau": _vec(3),
            "f_b": {"type": ["number", "null"]},
            "g": _num(exclusive_min=0),
            "d": _num(exclusive_min=0),
            "l_b": _num(),
            "f_max": _num(exclusive_min=0),
        }),
        "control": _obj({
            "k": _num(minimum=0), "kd": _num(minimum=0),
            "kr": _num(minimum=0), "krd": _num(minimum=0),
            "kpx_yaw": _num(exclusive_min=0), "kpx_h": _num(exclusive_min=0),
            "charge_accel": _num(minimum=0),
            "manual_forward": _num(minimum=0),
            "manual_yaw": _num(minimum=0),
            "manual_climb": _num(minimum=0),
        }),
        "autonomy": _obj({
            "n_persist": {"type": "integer", "minimum": 1},
            "loss_timeout": _num(exclusive_min=0),
            "charge_timeout": _num(exclusive_min=0),
            "walk": _vec(2),
            "charge_cells": {"type": "integer", "minimum": 1},
            "charge_px": {"type": "integer", "minimum": 1},
            "cruise_accel": _num(minimum=0),
            "cruise_height": _num(exclusive_min=0),
        }),
        "perception": _obj({
            "d_thresh": _num(exclusive_min=0),
            "p_hit": _num(exclusive_min=0, maximum=0.999),
            "p_miss": _num(exclusive_min=0, maximum=0.999),
            "clamp": _num(exclusive_min=0),
            "p_act": _num(exclusive_min=0, maximum=0.999),
            "goal_mode": {"enum": ["color", "ir"]},
            "goal_d_thresh": _num(exclusive_min=0),
            "luminance_thresh": _num(minimum=0, maximum=255),
            "min_blob": {"type": "integer", "minimum": 1},
        }),
        "radio": _obj({
            "loss_onset": _num(minimum=0),
            "loss_limit": _num(exclusive_min=0),
            "latency": _num(minimum=0),
            "bandwidth_bps": _num(exclusive_min=0),
        }),
        "camera": _obj({
            "hfov_deg": _num(exclusive_min=0, maximum=170),
            "mount": _vec(3),
        }),
        "hoops": {
            "type": "array",
            "items": _obj({
                "shape": {"enum": ["triangle", "rectangle", "circle"]},
                "pos": _vec(3),
            }),
        },
        "ac_units": {
            "type": "array",
            "items": _obj({"pos": _vec(3), "dir": _vec(3)}),
        },
        "balloon_family": _FAMILY_SCHEMA,
        "goal_family": _FAMILY_SCHEMA,
        "experiment": _obj({
            "pickup": _GRID_SCHEMA,
            "delivery": _GRID_SCHEMA,
        }),
    },
}


@dataclass
class ExperimentGrid:
    n_blimps: list[int] = field(default_factory=lambda: [1, 2, 3, 4])
    n_balloons: list[int] = field(default_factory=lambda: [8])
    duration: float = 300.0


@dataclass
class SimConfig:
    world: WorldConfig
    pickup_grid: ExperimentGrid
    delivery_grid: ExperimentGrid


def _family(doc) -> ColorFamily | None:
    if doc is None:
        return None
    return ColorFamily.from_json(doc)


def config_from_dict(doc: dict) -> SimConfig:
    """Validate a raw document against the schema and build the runtime
    configuration."""
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as e:
        raise ConfigError(f"config schema violation: {e.message}") from e

    blimp = doc.get("blimp", {})
    params_kw = {}
    for src, dst in (("m", "m"), ("J", "J"), ("d_f", "d_f"), ("d_tau", "d_tau"),
                     ("g", "g"), ("d", "d"), ("l_b", "l_b"), ("f_max", "f_max")):
        if src in blimp:
            params_kw[dst] = (np.array(blimp[src])
                              if isinstance(blimp[src], list) else blimp[src])
    if blimp.get("f_b") is not None:
        params_kw["f_b"] = blimp["f_b"]
        params = BlimpParams(**params_kw)
    else:
        params = BlimpParams.trimmed(**params_kw)

    c = doc.get("control", {})
    gains = Gains(
        k=c.get("k", Gains.k), k_d=c.get("kd", Gains.k_d),
        k_r=c.get("kr", Gains.k_r), k_rd=c.get("krd", Gains.k_rd),
        k_px_yaw=c.get("kpx_yaw", Gains.k_px_yaw),
        k_px_h=c.get("kpx_h", Gains.k_px_h),
    )
    control = ControlConfig(
        gains=gains,
        charge_accel=c.get("charge_accel", ControlConfig.charge_accel),
        manual_forward=c.get("manual_forward", ControlConfig.manual_forward),
        manual_yaw=c.get("manual_yaw", ControlConfig.manual_yaw),
        manual_climb=c.get("manual_climb", ControlConfig.manual_climb),
    )

    a = doc.get("autonomy", {})
    autonomy = AutonomyConfig(
        n_persist=a.get("n_persist", AutonomyConfig.n_persist),
        loss_timeout=a.get("loss_timeout", AutonomyConfig.loss_timeout),
        charge_timeout=a.get("charge_timeout", AutonomyConfig.charge_timeout),
        walk_min=a.get("walk", [AutonomyConfig.walk_min, AutonomyConfig.walk_max])[0],
        walk_max=a.get("walk", [AutonomyConfig.walk_min, AutonomyConfig.walk_max])[1],
        charge_cells=a.get("charge_cells", AutonomyConfig.charge_cells),
        charge_px=a.get("charge_px", AutonomyConfig.charge_px),
        cruise_accel=a.get("cruise_accel", AutonomyConfig.cruise_accel),
        cruise_height=a.get("cruise_height", AutonomyConfig.cruise_height),
    )

    p = doc.get("perception", {})
    perception = PerceptionConfig(
        d_thresh=p.get("d_thresh", PerceptionConfig.d_thresh),
        p_hit=p.get("p_hit", PerceptionConfig.p_hit),
        p_miss=p.get("p_miss", PerceptionConfig.p_miss),
        clamp=p.get("clamp", PerceptionConfig.clamp),
        p_act=p.get("p_act", PerceptionConfig.p_act),
        goal_mode=p.get("goal_mode", PerceptionConfig.goal_mode),
        goal_d_thresh=p.get("goal_d_thresh", PerceptionConfig.goal_d_thresh),
        luminance_thresh=p.get("luminance_thresh",
                               PerceptionConfig.luminance_thresh),
        min_blob=p.get("min_blob", PerceptionConfig.min_blob),
    )

    r = doc.get("radio", {})
    radio = RadioModel(
        loss_onset=r.get("loss_onset", RadioModel.loss_onset),
        loss_limit=r.get("loss_limit", RadioModel.loss_limit),
        latency=r.get("latency", RadioModel.latency),
        bandwidth_bps=r.get("bandwidth_bps", RadioModel.bandwidth_bps),
    )
    if radio.loss_limit <= radio.loss_onset:
        raise ConfigError("radio loss_limit must exceed loss_onset")

    cam = doc.get("camera", {})
    camera = CameraModel(
        hfov_deg=cam.get("hfov_deg", CameraModel.hfov_deg),
        mount=tuple(cam.get("mount", CameraModel.mount)),
    )

    if "hoops" in doc:
        hoops = tuple((GoalShape(h["shape"]), tuple(h["pos"]))
                      for h in doc["hoops"])
    else:
        hoops = DEFAULT_HOOPS
    if "ac_units" in doc:
        ac_units = tuple((tuple(u["pos"]), tuple(u["dir"]))
                         for u in doc["ac_units"])
    else:
        ac_units = DEFAULT_AC_UNITS

    world = WorldConfig(
        seed=doc.get("seed", 0),
        arena=tuple(doc.get("arena", (20.0, 15.0, 8.0))),
        n_blimps=doc.get("n_blimps", 2),
        n_balloons=doc.get("n_balloons", 4),
        balloon_spawn=doc.get("balloon_spawn", 5.0),
        blimp_spawn=doc.get("blimp_spawn", 10.0),
        scenario=doc.get("scenario", "delivery"),
        redeploy_delay=doc.get("redeploy_delay", 10.0),
        params=params,
        control=control,
        autonomy=autonomy,
        perception=perception,
        radio=radio,
        camera=camera,
        hoops=hoops,
        ac_units=ac_units,
        station_pos=tuple(doc.get("station_pos", (0.0, -7.0, 1.0))),
        state_dir=doc.get("state_dir", "state"),
        balloon_family=_family(doc.get("balloon_family")),
        goal_family=_family(doc.get("goal_family")),
    )

    exp = doc.get("experiment", {})

    def grid(name, default_blimps):
        g = exp.get(name, {})
        return ExperimentGrid(
            n_blimps=list(g.get("n_blimps", default_blimps)),
            n_balloons=list(g.get("n_balloons", [8])),
            duration=g.get("duration", 300.0),
        )

    return SimConfig(world=world,
                     pickup_grid=grid("pickup", [1, 2, 3, 4]),
                     delivery_grid=grid("delivery", [4]))


def load_config(path) -> SimConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from e
    return config_from_dict(doc)


def default_config_dict() -> dict:
    """A fully commented-out starting point: all defaults, explicit."""
    return {
        "seed": 0,
        "arena": [20.0, 15.0, 8.0],
        "n_blimps": 2,
        "n_balloons": 4,
        "scenario": "delivery",
        "experiment": {
            "pickup": {"n_blimps": [1, 2, 3, 4], "n_balloons": [8],
                       "duration": 300.0},
            "delivery": {"n_blimps": [4], "n_balloons": [8],
                         "duration": 300.0},
        },
    }
