"""Shared vocabulary: terrain classes, experimental conditions, controller config."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from enum import Enum
from pathlib import Path
from typing import Any, Mapping

import yaml

TWO_PI = 2.0 * math.pi


class TerrainClass(str, Enum):
    INCLINE_STAIRS = "IS"
    LEVEL_GROUND = "LG"
    DECLINE_STAIRS = "DS"

    @property
    def index(self) -> int:
        return _TERRAIN_ORDER.index(self)

    @classmethod
    def parse(cls, value: str | TerrainClass) -> TerrainClass:
        if isinstance(value, TerrainClass):
            return value
        key = str(value).strip()
        for member in cls:
            if key.upper() == member.value or key.upper() == member.name:
                return member
        raise ValueError(f"unknown terrain class {value!r}")

    def __str__(self) -> str:
        return self.value


_TERRAIN_ORDER = (TerrainClass.INCLINE_STAIRS, TerrainClass.LEVEL_GROUND, TerrainClass.DECLINE_STAIRS)
TERRAINS: tuple[TerrainClass, ...] = _TERRAIN_ORDER

IS = TerrainClass.INCLINE_STAIRS
LG = TerrainClass.LEVEL_GROUND
DS = TerrainClass.DECLINE_STAIRS


class Condition(str, Enum):
    EXO_OFF = "exo-off"
    VISION_OFF = "vision-off"
    VISION_ON = "vision-on"

    @classmethod
    def parse(cls, value: str | Condition) -> Condition:
        if isinstance(value, Condition):
            return value
        key = str(value).strip().lower().replace("_", "-")
        for member in cls:
            if key in (member.value, member.name.lower().replace("_", "-")):
                return member
        raise ValueError(f"unknown condition {value!r}")

    def __str__(self) -> str:
        return self.value


def boundary_label(before: TerrainClass, after: TerrainClass) -> str:
    """Key used for transition-kind tables, e.g. ``"LG->IS"``."""
    return f"{before.value}->{after.value}"


class ConfigError(ValueError):
    """A configuration invariant is violated; ``field`` names the offender."""

    def __init__(self, field: str, reason: str):
        super().__init__(f"{field}: {reason}")
        self.field = field
        self.reason = reason


@dataclass(frozen=True)
class PidGains:
    # Ziegler-Nichols seed on the default plant with the integral gain
    # detuned to 0.6x; procedure in demos/tune_pid.py
    kp: float = 60.0
    ki: float = 830.0
    kd: float = 0.65
    integral_limit: float = 0.05  # rad*s
    omega_max: float = 30.0  # rad/s


@dataclass(frozen=True)
class ControllerConfig:
    """Controller parameters. Angles in rad, rates in Hz, time in s.

    The amplitude gains ``m_is``, ``m_lg`` and ``m_ds`` are placeholders
    ordered IS > LG > DS after the swing hip-flexion ranking on stairs; no
    published values exist for them.
    """

    eta: float = 5.0
    nu_phi: float = 20.0
    nu_omega: float = 20.0
    m_is: float = 1.4
    m_lg: float = 1.0
    m_ds: float = 0.8
    control_rate: float = 100.0
    vision_rate: float = 30.0
    pid: PidGains = field(default_factory=PidGains)
    omega_init: float = TWO_PI * 0.8
    omega_bounds: tuple[float, float] = (TWO_PI * 0.3, TWO_PI * 1.5)
    epsilon_amp: float = 1e-3
    ao_seed_amplitude: float = 0.05
    motor_tau: float = 0.02
    clamp_reference: bool = True
    low_level_substeps: int = 1

    @property
    def dt(self) -> float:
        return 1.0 / self.control_rate

    def amplitude(self, terrain: TerrainClass) -> float:
        return {IS: self.m_is, LG: self.m_lg, DS: self.m_ds}[terrain]

    def digest(self) -> str:
        payload = json.dumps(config_to_dict(self), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()[:16]


def validate_config(cfg: ControllerConfig) -> ControllerConfig:
    """Return ``cfg`` unchanged if every invariant holds, else raise ConfigError
    naming the first violated field."""
    finite = [
        "eta", "nu_phi", "nu_omega", "m_is", "m_lg", "m_ds", "control_rate",
        "vision_rate", "omega_init", "epsilon_amp", "ao_seed_amplitude", "motor_tau",
    ]
    for name in finite:
        value = getattr(cfg, name)
        if not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ConfigError(name, f"must be a finite number, got {value!r}")
    for name in ("eta", "nu_phi", "nu_omega"):
        if getattr(cfg, name) <= 0:
            raise ConfigError(name, "must be > 0")
    for name in ("m_is", "m_lg", "m_ds"):
        if getattr(cfg, name) < 0:
            raise ConfigError(name, "amplitude must be >= 0")
    if cfg.control_rate <= 0:
        raise ConfigError("control_rate", "must be > 0")
    if cfg.vision_rate <= 0:
        raise ConfigError("vision_rate", "must be > 0")
    if cfg.vision_rate >= cfg.control_rate:
        raise ConfigError("vision_rate", "must be below control_rate")
    lo, hi = cfg.omega_bounds
    if not (math.isfinite(lo) and math.isfinite(hi) and 0 < lo < hi):
        raise ConfigError("omega_bounds", "need 0 < lower < upper")
    if not lo < cfg.omega_init < hi:
        raise ConfigError("omega_init", "must lie strictly inside omega_bounds")
    if cfg.epsilon_amp <= 0:
        raise ConfigError("epsilon_amp", "must be > 0")
    if cfg.ao_seed_amplitude <= 0:
        raise ConfigError("ao_seed_amplitude", "must be > 0")
    if cfg.motor_tau <= 0:
        raise ConfigError("motor_tau", "must be > 0")
    if not isinstance(cfg.low_level_substeps, int) or cfg.low_level_substeps < 1:
        raise ConfigError("low_level_substeps", "must be an integer >= 1")
    pid = cfg.pid
    for name in ("kp", "ki", "kd"):
        value = getattr(pid, name)
        if not math.isfinite(value) or value < 0:
            raise ConfigError(f"pid.{name}", "must be finite and >= 0")
    if not pid.integral_limit > 0:
        raise ConfigError("pid.integral_limit", "must be > 0")
    if not pid.omega_max > 0:
        raise ConfigError("pid.omega_max", "must be > 0")
    return cfg


# --- config file ------------------------------------------------------------
#
# Keys carry their unit. Angle-valued keys may be given in degrees by using the
# ``_deg`` (or ``_deg_per_s``) spelling instead; this is the only place degrees
# are converted.

_UNIT_KEYS: dict[str, tuple[str, str]] = {
    # file key -> (attribute, unit kind)
    "eta": ("eta", "1"),
    "nu_phi": ("nu_phi", "1"),
    "nu_omega": ("nu_omega", "1"),
    "m_is_rad": ("m_is", "rad"),
    "m_lg_rad": ("m_lg", "rad"),
    "m_ds_rad": ("m_ds", "rad"),
    "control_rate_hz": ("control_rate", "1"),
    "vision_rate_hz": ("vision_rate", "1"),
    "omega_init_rad_per_s": ("omega_init", "rad"),
    "omega_bounds_rad_per_s": ("omega_bounds", "rad"),
    "epsilon_amp_rad": ("epsilon_amp", "rad"),
    "ao_seed_amplitude_rad": ("ao_seed_amplitude", "rad"),
    "motor_tau_s": ("motor_tau", "1"),
    "clamp_reference": ("clamp_reference", "1"),
    "low_level_substeps": ("low_level_substeps", "1"),
}

_PID_KEYS: dict[str, tuple[str, str]] = {
    "kp": ("kp", "1"),
    "ki": ("ki", "1"),
    "kd": ("kd", "1"),
    "integral_limit_rad_s": ("integral_limit", "rad"),
    "omega_max_rad_per_s": ("omega_max", "rad"),
}


def _degree_alias(key: str) -> str | None:
    if key.endswith("_rad"):
        return key[: -len("_rad")] + "_deg"
    if key.endswith("_rad_per_s"):
        return key[: -len("_rad_per_s")] + "_deg_per_s"
    if key.endswith("_rad_s"):
        return key[: -len("_rad_s")] + "_deg_s"
    return None


def _ingest(raw: Mapping[str, Any], table: Mapping[str, tuple[str, str]], where: str) -> dict[str, Any]:
    out: dict[str, Any] = {}
    aliases = {_degree_alias(k): k for k, (_, kind) in table.items() if kind == "rad"}
    aliases.pop(None, None)
    for key, value in raw.items():
        if key in table:
            attr, _ = table[key]
            out[attr] = tuple(float(v) for v in value) if isinstance(value, (list, tuple)) else value
        elif key in aliases:
            attr, _ = table[aliases[key]]
            if isinstance(value, (list, tuple)):
                out[attr] = tuple(math.radians(float(v)) for v in value)
            else:
                out[attr] = math.radians(float(value))
        else:
            raise ConfigError(f"{where}{key}", "unknown key")
    return out


def config_from_dict(raw: Mapping[str, Any]) -> ControllerConfig:
    raw = dict(raw or {})
    pid_raw = raw.pop("pid", {}) or {}
    kwargs = _ingest(raw, _UNIT_KEYS, "")
    pid_kwargs = _ingest(pid_raw, _PID_KEYS, "pid.")
    for name, value in list(kwargs.items()):
        if name not in ("clamp_reference", "low_level_substeps", "omega_bounds"):
            kwargs[name] = float(value)
    if "low_level_substeps" in kwargs:
        kwargs["low_level_substeps"] = int(kwargs["low_level_substeps"])
    if "clamp_reference" in kwargs:
        kwargs["clamp_reference"] = bool(kwargs["clamp_reference"])
    pid = replace(PidGains(), **{k: float(v) for k, v in pid_kwargs.items()})
    return ControllerConfig(pid=pid, **kwargs)


def config_to_dict(cfg: ControllerConfig) -> dict[str, Any]:
    inverse = {attr: key for key, (attr, _) in _UNIT_KEYS.items()}
    out: dict[str, Any] = {}
    for f in fields(cfg):
        if f.name == "pid":
            continue
        value = getattr(cfg, f.name)
        out[inverse[f.name]] = list(value) if isinstance(value, tuple) else value
    pid_inverse = {attr: key for key, (attr, _) in _PID_KEYS.items()}
    out["pid"] = {pid_inverse[k]: v for k, v in asdict(cfg.pid).items()}
    return out


def load_config(path: str | Path | None) -> ControllerConfig:
    """Read and validate a YAML config file; ``None`` gives the defaults."""
    if path is None:
        return validate_config(ControllerConfig())
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text()) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(str(path), f"not valid YAML: {exc}") from exc
    if not isinstance(raw, Mapping):
        raise ConfigError(str(path), "top level must be a mapping")
    return validate_config(config_from_dict(raw))


def save_config(cfg: ControllerConfig, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(config_to_dict(cfg), sort_keys=False))
