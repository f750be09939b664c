"""Scenario configuration: YAML loading, defaults, overrides, validation.

Every gain bound is checked at load time; violations raise ConfigError with
the dotted path of the offending key so `validate` can report them directly.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .dcm_control import GainBoundError, GainSet, omega_from_com_height
from .gait import PlanError, PlannerParams
from .model import ModelSchemaError, RobotModel, load_model_file
from .retarget import RetargetCalibration
from .spatial import Transform
from .wholebody import FootGains, HandGains, TaskGains

DEFAULTS: dict = {
    "model": "builtin:desk_biped",
    "dt": 0.01,
    "duration": 10.0,
    "z_com": 0.53,
    "gravity": 9.81,
    "command_source": {"kind": "file", "path": None},
    "plant": {
        "zmp_delay_ticks": 0,
        "saturate_zmp": True,
        "initial_com_offset": [0.0, 0.0],
    },
    "gains": {
        "dcm": {"kp": 2.2, "ki": 0.05, "integral_bound": 0.05},
        "zmp_com": {"k_zmp": 1.0, "k_com": 6.0},
    },
    "wholebody": {
        "torso_kw": 2.0,
        "hand": {"kp": 3.0, "ki": 0.2, "kw": 3.0, "weight_linear": 2.0,
                 "weight_angular": 0.5, "integral_bound": 0.02},
        "foot": {"kp": 5.0, "ki": 0.1, "kw": 5.0, "integral_bound": 0.02},
        "com": {"kp": 4.0, "ki": 0.5, "integral_bound": 0.02},
        "postural_weight": {"default": 1.0, "arms": 0.25},
        "postural_gain": 1.0,
        "hand_feedback_sign": -1.0,
    },
    "planner": {
        "step_duration": 1.0,
        "ds_duration": 0.2,
        "step_width": 0.16,
        "apex_height": 0.03,
        "max_step_length": 0.18,
        "min_step_width": 0.10,
        "max_step_width": 0.26,
        "max_turn": 0.3,
        "turn_gain": 1.0,
        "deadband": 0.05,
        "horizon_steps": 4,
    },
    "retarget": {"scale_ratio": 1.0},
    "bridge": {
        "port": 8787,
        "state_rate_hz": 30.0,
        "realtime_factor": 1.0,
        "disconnect_grace_s": 0.5,
        "decay_time_s": 1.0,
        "max_walk_speed": 0.6,
        "wait_for_client_s": 0.0,
    },
    "output": {"telemetry": None},
}


class ConfigError(ValueError):
    """Invalid scenario configuration; message carries the config path."""


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value, where)
        else:
            out[key] = copy.deepcopy(value)
    return out


def apply_override(raw: dict, dotted_key: str, value: str):
    """Apply one `--set key.path=value` override; value parsed as YAML."""
    keys = dotted_key.split(".")
    node = raw
    for k in keys[:-1]:
        if not isinstance(node.get(k), dict):
            node[k] = {}
        node = node[k]
    node[keys[-1]] = yaml.safe_load(value)


def _diag(value, dim: int, path: str) -> np.ndarray:
    """Scalar -> diagonal matrix; list -> diagonal; nested list -> full matrix."""
    if isinstance(value, (int, float)):
        return float(value) * np.eye(dim)
    arr = np.asarray(value, dtype=float)
    if arr.shape == (dim,):
        return np.diag(arr)
    if arr.shape == (dim, dim):
        return arr
    raise ConfigError(f"{path}: expected scalar, {dim}-list, or {dim}x{dim} matrix")


@dataclass
class ScenarioConfig:
    raw: dict
    base_dir: Path
    model: RobotModel
    omega: float
    dt: float
    duration: float
    z_com: float
    gains: GainSet
    dcm_integral_bound: float
    task_gains: TaskGains
    hand_integral_bound: float
    foot_integral_bound: float
    com_integral_bound: float
    hand_feedback_sign: float
    planner: PlannerParams
    calibration: RetargetCalibration
    plant: dict
    command_source: dict
    bridge: dict
    telemetry_path: str | None
    postural_weights: np.ndarray = field(default=None)

    def command_file(self) -> Path | None:
        path = self.command_source.get("path")
        if path is None:
            return None
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p


def builtin_path(name: str) -> Path:
    return Path(str(resources.files("telewalk").joinpath(f"data/{name}.yaml")))


def load_config(path, overrides: list[str] | None = None) -> ScenarioConfig:
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            user = yaml.safe_load(f.read()) or {}
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"unparseable config: {e}") from e
    if not isinstance(user, dict):
        raise ConfigError("config must be a mapping")
    for entry in overrides or []:
        if "=" not in entry:
            raise ConfigError(f"override '{entry}' must look like key.path=value")
        key, value = entry.split("=", 1)
        apply_override(user, key.strip(), value)
    return build_config(user, base_dir=path.parent)


def build_config(user: dict, base_dir: Path | None = None) -> ScenarioConfig:
    raw = _merge(DEFAULTS, user)
    base_dir = Path(".") if base_dir is None else base_dir

    def require_positive(value, where):
        try:
            v = float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{where}: expected a number, got {value!r}") from None
        if v <= 0 or not np.isfinite(v):
            raise ConfigError(f"{where}: must be a positive finite number, got {v}")
        return v

    dt = require_positive(raw["dt"], "dt")
    duration = require_positive(raw["duration"], "duration")
    z_com = require_positive(raw["z_com"], "z_com")
    gravity = require_positive(raw["gravity"], "gravity")
    omega = omega_from_com_height(z_com, gravity)

    model_ref = raw["model"]
    if isinstance(model_ref, str) and model_ref.startswith("builtin:"):
        model_path = builtin_path(model_ref.split(":", 1)[1])
    else:
        model_path = Path(model_ref)
        if not model_path.is_absolute():
            model_path = base_dir / model_path
    try:
        model = load_model_file(model_path)
    except OSError as e:
        raise ConfigError(f"model: cannot read '{model_path}': {e}") from e
    except ModelSchemaError as e:
        raise ConfigError(f"model: {e}") from e

    g = raw["gains"]
    try:
        gains = GainSet(
            _diag(g["dcm"]["kp"], 2, "gains.dcm.kp"),
            _diag(g["dcm"]["ki"], 2, "gains.dcm.ki"),
            _diag(g["zmp_com"]["k_zmp"], 2, "gains.zmp_com.k_zmp"),
            _diag(g["zmp_com"]["k_com"], 2, "gains.zmp_com.k_com"),
            omega,
        )
    except GainBoundError as e:
        raise ConfigError(f"gains: {e}") from e
    dcm_integral_bound = require_positive(g["dcm"]["integral_bound"],
                                          "gains.dcm.integral_bound")

    wb = raw["wholebody"]
    n = model.n_joints
    weights = np.full(n, float(wb["postural_weight"].get("default", 1.0)))
    for group, value in wb["postural_weight"].items():
        if group == "default":
            continue
        if group not in model.groups:
            raise ConfigError(
                f"wholebody.postural_weight.{group}: model has no group '{group}'")
        for jname in model.groups[group]:
            weights[model.joint_index[jname]] = float(value)
    if (weights <= 0).any():
        raise ConfigError("wholebody.postural_weight: weights must be positive")

    def hand_gains(section, path):
        return HandGains(
            _diag(section["kp"], 3, f"{path}.kp"),
            _diag(section["ki"], 3, f"{path}.ki"),
            _diag(section["kw"], 3, f"{path}.kw"),
            np.diag(np.concatenate([
                np.full(3, float(section["weight_linear"])),
                np.full(3, float(section["weight_angular"]))])),
        )

    try:
        task_gains = TaskGains(
            torso_kw=_diag(wb["torso_kw"], 3, "wholebody.torso_kw"),
            left_hand=hand_gains(wb["hand"], "wholebody.hand"),
            right_hand=hand_gains(wb["hand"], "wholebody.hand"),
            foot=FootGains(
                _diag(wb["foot"]["kp"], 3, "wholebody.foot.kp"),
                _diag(wb["foot"]["ki"], 3, "wholebody.foot.ki"),
                _diag(wb["foot"]["kw"], 3, "wholebody.foot.kw"),
            ),
            com_kp=_diag(wb["com"]["kp"], 3, "wholebody.com.kp"),
            com_ki=_diag(wb["com"]["ki"], 3, "wholebody.com.ki"),
            postural_weight=np.diag(weights),
            postural_gain=_diag(wb["postural_gain"], n, "wholebody.postural_gain"),
        )
    except ValueError as e:
        raise ConfigError(f"wholebody: {e}") from e

    try:
        planner = PlannerParams(
            step_duration=float(raw["planner"]["step_duration"]),
            ds_duration=float(raw["planner"]["ds_duration"]),
            step_width=float(raw["planner"]["step_width"]),
            apex_height=float(raw["planner"]["apex_height"]),
            max_step_length=float(raw["planner"]["max_step_length"]),
            min_step_width=float(raw["planner"]["min_step_width"]),
            max_step_width=float(raw["planner"]["max_step_width"]),
            max_turn=float(raw["planner"]["max_turn"]),
            turn_gain=float(raw["planner"]["turn_gain"]),
            deadband=float(raw["planner"]["deadband"]),
            horizon_steps=int(raw["planner"]["horizon_steps"]),
        ).validate()
    except PlanError as e:
        raise ConfigError(f"planner: {e}") from e

    rt = raw["retarget"]
    try:
        calibration = RetargetCalibration(
            scale_ratio=float(rt.get("scale_ratio", 1.0)),
            head_to_retarget=(Transform.from_flat(rt["head_to_retarget"])
                              if "head_to_retarget" in rt else None),
        )
    except ValueError as e:
        raise ConfigError(f"retarget: {e}") from e

    plant = raw["plant"]
    delay = int(plant["zmp_delay_ticks"])
    if delay < 0:
        raise ConfigError("plant.zmp_delay_ticks: must be >= 0")
    offset = np.asarray(plant["initial_com_offset"], dtype=float)
    if offset.shape != (2,):
        raise ConfigError("plant.initial_com_offset: expected [dx, dy]")

    source = raw["command_source"]
    if source.get("kind") not in ("file", "bridge", "none"):
        raise ConfigError("command_source.kind: must be file|bridge|none")

    return ScenarioConfig(
        raw=raw,
        base_dir=base_dir,
        model=model,
        omega=omega,
        dt=dt,
        duration=duration,
        z_com=z_com,
        gains=gains,
        dcm_integral_bound=dcm_integral_bound,
        task_gains=task_gains,
        hand_integral_bound=require_positive(
            wb["hand"]["integral_bound"], "wholebody.hand.integral_bound"),
        foot_integral_bound=require_positive(
            wb["foot"]["integral_bound"], "wholebody.foot.integral_bound"),
        com_integral_bound=require_positive(
            wb["com"]["integral_bound"], "wholebody.com.integral_bound"),
        hand_feedback_sign=float(wb["hand_feedback_sign"]),
        planner=planner,
        calibration=calibration,
        plant={"zmp_delay_ticks": delay,
               "saturate_zmp": bool(plant["saturate_zmp"]),
               "initial_com_offset": offset},
        command_source=source,
        bridge=raw["bridge"],
        telemetry_path=raw["output"]["telemetry"],
    )
