"""Run configuration shared by every CLI subcommand.

A config file is JSON with any subset of the sections below; missing keys
take the defaults, unknown keys are an error. Each section is validated by
the dataclass that owns it, and errors name the offending field::

    {
      "resolution_m": 0.05,
      "potential": {"alpha": 0.5, "d_max": 3.0, "beta": null, "gamma": null,
                    "area_norm": "total-free-space", "area_norm_constant": null},
      "sensor": {"range_m": 5.0, "fov_deg": 90.0, "rays": null},
      "motion": {"forward_m": 0.25, "turn_deg": 30, "dilation_cells": 1},
      "mask": {"strategy": "square", "square_side_m": 3.0, "cone_radius_m": 3.0, "cone_fov_deg": 90.0},
      "scene": {"width_m": 8.0, "height_m": 8.0, "room_count_range": [3, 6], "door_width_m": 0.9},
      "episode": {"budget_steps": 500, "success_radius_m": 1.0},
      "seeds": {"scene": 0, "dataset": 0, "eval": 0}
    }
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any

from .dataset import MaskParams
from .potentials import PotentialParams
from .sim import MotionParams, SensorParams


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the dotted field name."""


@dataclass(frozen=True)
class SceneConfig:
    width_m: float = 8.0
    height_m: float = 8.0
    room_count_range: tuple[int, int] = (3, 6)
    door_width_m: float = 0.9

    def __post_init__(self):
        object.__setattr__(self, "room_count_range", tuple(self.room_count_range))
        if not (self.width_m > 0 and self.height_m > 0):
            raise ValueError("scene size must be positive")
        lo, hi = self.room_count_range
        if not 1 <= lo <= hi:
            raise ValueError("room_count_range must satisfy 1 <= lo <= hi")
        if not self.door_width_m > 0:
            raise ValueError("door_width_m must be positive")


@dataclass(frozen=True)
class EpisodeConfig:
    budget_steps: int = 500
    success_radius_m: float = 1.0

    def __post_init__(self):
        if self.budget_steps < 1:
            raise ValueError("budget_steps must be positive")
        if not self.success_radius_m >= 0:
            raise ValueError("success_radius_m must be non-negative")


@dataclass(frozen=True)
class Seeds:
    scene: int = 0
    dataset: int = 0
    eval: int = 0


@dataclass(frozen=True)
class RunConfig:
    resolution_m: float = 0.05
    potential: PotentialParams = field(default_factory=PotentialParams)
    sensor: SensorParams = field(default_factory=SensorParams)
    motion: MotionParams = field(default_factory=MotionParams)
    mask: MaskParams = field(default_factory=MaskParams)
    scene: SceneConfig = field(default_factory=SceneConfig)
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)
    seeds: Seeds = field(default_factory=Seeds)

    def __post_init__(self):
        if not self.resolution_m > 0:
            raise ConfigError("resolution_m: must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["scene"]["room_count_range"] = list(self.scene.room_count_range)
        return d

    def with_values(self, **overrides) -> "RunConfig":
        """Override dotted fields, e.g. ``{"potential.alpha": 0.3}``; None values are ignored."""
        data = self.to_dict()
        for key, value in overrides.items():
            if value is None:
                continue
            *path, leaf = key.split(".")
            node = data
            for part in path:
                node = node[part]
            if leaf not in node:
                raise ConfigError(f"{key}: unknown field")
            node[leaf] = value
        return config_from_dict(data)


_SECTIONS = {f.name: f.type for f in fields(RunConfig)}
_SECTION_TYPES = {"potential": PotentialParams, "sensor": SensorParams, "motion": MotionParams,
                  "mask": MaskParams, "scene": SceneConfig, "episode": EpisodeConfig, "seeds": Seeds}


def _build(section: str, cls, value: Any):
    if not isinstance(value, dict):
        raise ConfigError(f"{section}: expected an object")
    known = {f.name for f in fields(cls)}
    for key in value:
        if key not in known:
            raise ConfigError(f"{section}.{key}: unknown key")
    try:
        return replace(cls(), **value)
    except (TypeError, ValueError) as exc:
        # the owning dataclass names the field in its message; prefix the section
        bad = next((k for k in value if k in str(exc)), None)
        where = f"{section}.{bad}" if bad else section
        raise ConfigError(f"{where}: {exc}") from None


def config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config: expected a JSON object")
    for key in data:
        if key not in _SECTIONS:
            raise ConfigError(f"{key}: unknown key")
    kwargs: dict[str, Any] = {}
    if "resolution_m" in data:
        r = data["resolution_m"]
        if isinstance(r, bool) or not isinstance(r, (int, float)):
            raise ConfigError("resolution_m: expected a number")
        kwargs["resolution_m"] = float(r)
    for section, cls in _SECTION_TYPES.items():
        if section in data:
            kwargs[section] = _build(section, cls, data[section])
    return RunConfig(**kwargs)


def loads_config(text: str) -> RunConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: not valid JSON ({exc})") from None
    return config_from_dict(data)


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            return loads_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None


def dumps_config(cfg: RunConfig) -> str:
    return json.dumps(cfg.to_dict(), sort_keys=True, indent=1) + "\n"
